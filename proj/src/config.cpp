#include "idcanvas/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "idcanvas/errors.hpp"

namespace idcanvas {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
    return out;
}

long parse_long(const std::string& key, const std::string& v) {
    long out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
    return out;
}

std::size_t parse_size(const std::string& key, const std::string& v) {
    const long n = parse_long(key, v);
    if (n < 0) throw ConfigError("config: '" + key + "' must be non-negative");
    return static_cast<std::size_t>(n);
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config: '" + key + "' expects true/false, got '" + v + "'");
}

template <typename T, typename F>
std::vector<T> parse_list(const std::string& v, F parse_one) {
    std::vector<T> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!trim(item).empty()) out.push_back(parse_one(trim(item)));
    return out;
}

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F f) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + f(xs[i]);
    return out;
}

}  // namespace

void ExperimentConfig::validate() const {
    model_config().validate();
    scene_spec().validate();
    if (image_size % patch != 0) throw ConfigError("config: image_size must be a multiple of patch");
    if (attention != "isolated" && attention != "all_visible")
        throw ConfigError("config: attention must be 'isolated' or 'all_visible'");
    if (prediction != "clean" && prediction != "velocity")
        throw ConfigError("config: prediction must be 'clean' or 'velocity'");
    if (!(lambda >= 0.0)) throw ConfigError("config: lambda must be non-negative");
    if (!(dropout >= 0.0 && dropout <= 1.0)) throw ConfigError("config: dropout must lie in [0, 1]");
    if (!(degrade_probability >= 0.0 && degrade_probability <= 1.0))
        throw ConfigError("config: degrade_probability must lie in [0, 1]");
    if (!(lr > 0.0)) throw ConfigError("config: lr must be positive");
    if (steps < 0) throw ConfigError("config: steps must be non-negative");
    if (dataset_size == 0) throw ConfigError("config: dataset_size must be positive");
    if (sample_steps == 0) throw ConfigError("config: sample_steps must be positive");
    if (checkpoint_every < 0) throw ConfigError("config: checkpoint_every must be non-negative");
    schedule().validate();
}

DiTConfig ExperimentConfig::model_config() const {
    DiTConfig c;
    c.image_size = image_size;
    c.patch = patch;
    c.width = width;
    c.blocks = blocks;
    c.heads = heads;
    c.vocab = kVocabSize;
    c.embed_dim = kOracleDim;
    c.id_hidden = id_hidden;
    c.mlp_ratio = mlp_ratio;
    c.rope_base = rope_base;
    c.identity_modulation = identity_modulation;
    c.mask = attention == "all_visible" ? MaskMode::AllVisible : MaskMode::IdentityIsolated;
    c.prediction = prediction == "velocity" ? Prediction::Velocity : Prediction::CleanImage;
    c.time_floor = time_floor;
    return c;
}

SceneSpec ExperimentConfig::scene_spec() const {
    SceneSpec s;
    s.image_size = image_size;
    s.patch = patch;
    s.reference_size = reference_size;
    s.box_sizes = box_sizes;
    s.min_identities = min_identities;
    s.max_identities = max_identities;
    return s;
}

CurriculumSchedule ExperimentConfig::schedule() const {
    if (!replacement) return CurriculumSchedule::fixed(0.0);
    if (curriculum == "compressed") return CurriculumSchedule::compressed(std::max(steps, 7L));
    if (curriculum == "standard") return CurriculumSchedule::standard();
    if (curriculum == "fixed") return CurriculumSchedule::fixed(fixed_p);
    if (curriculum == "custom") return CurriculumSchedule{milestones, probabilities};
    throw ConfigError("config: curriculum must be compressed, standard, fixed or custom");
}

AdamWConfig ExperimentConfig::optimizer() const {
    AdamWConfig a;
    a.lr = lr;
    a.weight_decay = weight_decay;
    return a;
}

std::string ExperimentConfig::to_text() const {
    std::map<std::string, std::string> kv;
    auto size = [](std::size_t v) { return std::to_string(v); };
    kv["image_size"] = size(image_size);
    kv["patch"] = size(patch);
    kv["width"] = size(width);
    kv["blocks"] = size(blocks);
    kv["heads"] = size(heads);
    kv["id_hidden"] = size(id_hidden);
    kv["mlp_ratio"] = size(mlp_ratio);
    kv["rope_base"] = fmt(rope_base);
    kv["identity_modulation"] = identity_modulation ? "true" : "false";
    kv["attention"] = attention;
    kv["prediction"] = prediction;
    kv["time_floor"] = fmt(time_floor);
    kv["dataset_size"] = size(dataset_size);
    kv["reference_size"] = size(reference_size);
    kv["box_sizes"] = join(box_sizes, size);
    kv["min_identities"] = size(min_identities);
    kv["max_identities"] = size(max_identities);
    kv["data_path"] = data_path;
    kv["seed"] = std::to_string(seed);
    kv["steps"] = std::to_string(steps);
    kv["lambda"] = fmt(lambda);
    kv["lr"] = fmt(lr);
    kv["weight_decay"] = fmt(weight_decay);
    kv["dropout"] = fmt(dropout);
    kv["replacement"] = replacement ? "true" : "false";
    kv["curriculum"] = curriculum;
    kv["fixed_p"] = fmt(fixed_p);
    kv["milestones"] = join(milestones, [](long v) { return std::to_string(v); });
    kv["probabilities"] = join(probabilities, fmt);
    kv["degrade"] = degrade ? "true" : "false";
    kv["degrade_probability"] = fmt(degrade_probability);
    kv["checkpoint_every"] = std::to_string(checkpoint_every);
    kv["sample_steps"] = size(sample_steps);
    kv["cfg_scale"] = fmt(cfg_scale);
    kv["eval_scenes"] = size(eval_scenes);
    kv["sim_gt_min"] = fmt(sim_gt_min);
    kv["sim_ref_min"] = fmt(sim_ref_min);
    kv["out"] = out;
    std::string text;
    for (const auto& [k, v] : kv) text += k + "=" + v + "\n";
    return text;
}

void ExperimentConfig::apply(const std::string& key, const std::string& value) {
    const std::string& k = key;
    const std::string v = trim(value);
    auto sz = [&](std::size_t& f) { f = parse_size(k, v); };
    auto dbl = [&](double& f) { f = parse_double(k, v); };
    auto lng = [&](long& f) { f = parse_long(k, v); };
    auto bln = [&](bool& f) { f = parse_bool(k, v); };
    const std::map<std::string, std::function<void()>> setters = {
        {"image_size", [&] { sz(image_size); }},
        {"patch", [&] { sz(patch); }},
        {"width", [&] { sz(width); }},
        {"blocks", [&] { sz(blocks); }},
        {"heads", [&] { sz(heads); }},
        {"id_hidden", [&] { sz(id_hidden); }},
        {"mlp_ratio", [&] { sz(mlp_ratio); }},
        {"rope_base", [&] { dbl(rope_base); }},
        {"identity_modulation", [&] { bln(identity_modulation); }},
        {"attention", [&] { attention = v; }},
        {"prediction", [&] { prediction = v; }},
        {"time_floor", [&] { dbl(time_floor); }},
        {"dataset_size", [&] { sz(dataset_size); }},
        {"reference_size", [&] { sz(reference_size); }},
        {"box_sizes", [&] { box_sizes = parse_list<std::size_t>(v, [&](const std::string& s) { return parse_size(k, s); }); }},
        {"min_identities", [&] { sz(min_identities); }},
        {"max_identities", [&] { sz(max_identities); }},
        {"data_path", [&] { data_path = v; }},
        {"seed", [&] { seed = static_cast<std::uint64_t>(parse_size(k, v)); }},
        {"steps", [&] { lng(steps); }},
        {"lambda", [&] { dbl(lambda); }},
        {"lr", [&] { dbl(lr); }},
        {"weight_decay", [&] { dbl(weight_decay); }},
        {"dropout", [&] { dbl(dropout); }},
        {"replacement", [&] { bln(replacement); }},
        {"curriculum", [&] { curriculum = v; }},
        {"fixed_p", [&] { dbl(fixed_p); }},
        {"milestones", [&] { milestones = parse_list<long>(v, [&](const std::string& s) { return parse_long(k, s); }); }},
        {"probabilities", [&] { probabilities = parse_list<double>(v, [&](const std::string& s) { return parse_double(k, s); }); }},
        {"degrade", [&] { bln(degrade); }},
        {"degrade_probability", [&] { dbl(degrade_probability); }},
        {"checkpoint_every", [&] { lng(checkpoint_every); }},
        {"sample_steps", [&] { sz(sample_steps); }},
        {"cfg_scale", [&] { dbl(cfg_scale); }},
        {"eval_scenes", [&] { sz(eval_scenes); }},
        {"sim_gt_min", [&] { dbl(sim_gt_min); }},
        {"sim_ref_min", [&] { dbl(sim_ref_min); }},
        {"out", [&] { out = v; }},
    };
    auto it = setters.find(k);
    if (it == setters.end()) throw ConfigError("config: unknown key '" + k + "'");
    it->second();
}

void ExperimentConfig::apply_text(const std::string& text, const std::string& origin) {
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key=value");
        apply(trim(t.substr(0, eq)), t.substr(eq + 1));
    }
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    ExperimentConfig c;
    c.apply_text(ss.str(), path);
    return c;
}

std::string config_hash(const ExperimentConfig& config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : config.to_text()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace idcanvas
