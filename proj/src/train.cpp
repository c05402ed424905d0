#include "idcanvas/train.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <thread>

#include "idcanvas/checkpoint.hpp"
#include "idcanvas/errors.hpp"
#include "idcanvas/log.hpp"

#ifndef IDCANVAS_GIT_DESCRIBE
#define IDCANVAS_GIT_DESCRIBE "unknown"
#endif

namespace fs = std::filesystem;

namespace idcanvas {

namespace {

constexpr std::uint64_t kTrainStream = 0x7a11;
constexpr std::uint64_t kDataStream = 0xda7a;
constexpr std::uint64_t kModelStream = 0x30de1;
constexpr std::uint64_t kSampleStream = 0x5a3b;
constexpr double kHeldoutTimes[] = {0.25, 0.5, 0.75};

Tensor gaussian_like(const Tensor& like, Rng& rng) {
    Tensor out(like.shape());
    for (double& v : out.data()) v = normal(rng);
    return out;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    std::ostringstream ss;
    ss << std::setprecision(17) << v;
    return ss.str();
}

void dump_batch(const std::string& dir, const SyntheticScene& scene, std::size_t index,
                const StepLosses& losses, long step) {
    fs::create_directories(dir);
    write_ppm(dir + "/ground_truth.ppm", scene.image);
    write_ppm(dir + "/x_t.ppm", from_model_space(losses.x_t));
    for (std::size_t i = 0; i < losses.conditions.identities.size(); ++i)
        write_ppm(dir + "/canvas_" + std::to_string(i) + ".ppm",
                  from_model_space(losses.conditions.identities[i].canvas));
    std::ofstream info(dir + "/batch.txt");
    info << "step=" << step << "\nscene_index=" << index << "\nt=" << format_double(losses.t)
         << "\nl_fm=" << format_double(losses.l_fm.item()) << "\nprompt=";
    for (int w : scene.prompt) info << word_name(w) << ' ';
    info << "\n";
    for (std::size_t i = 0; i < losses.conditions.dropped.size(); ++i)
        info << "identity" << i << ": dropped=" << losses.conditions.dropped[i]
             << " replaced=" << losses.conditions.replaced[i] << "\n";
}

}  // namespace

StepLosses example_losses(const DiTModel& model, const SyntheticScene& scene,
                          const ExperimentConfig& config, const OracleEmbedder& oracle,
                          double p_replace, Rng& rng) {
    StepLosses out;
    const Tensor x0 = to_model_space(scene.image);
    out.t = uniform(rng);
    FlowBatch batch = FlowBatch::make(x0, gaussian_like(x0, rng), out.t);
    out.x_t = batch.x_t;

    ConditionOptions opts;
    opts.replace_probability = p_replace;
    opts.dropout = config.dropout;
    opts.degrade = config.degrade;
    opts.degrade_probability = config.degrade_probability;
    out.conditions = prepare_conditions(scene, opts, rng, oracle, model.config(), config.reference_size);

    ModelInput in;
    in.x_t = batch.x_t;
    in.t = batch.t;
    in.prompt = scene.prompt;
    in.identities = out.conditions.identities;
    batch.prediction = model.forward(in);
    out.l_fm = cfm_loss(batch);

    batch.x0_hat = one_step_estimate(ad::constant(batch.x_t), batch.t, batch.prediction);
    std::vector<ad::Var> crops;
    std::vector<Tensor> targets;
    for (std::size_t i = 0; i < scene.identities.size(); ++i) {
        if (out.conditions.dropped[i]) continue;
        crops.push_back(crop_face(batch.x0_hat, scene.identities[i].box));
        targets.push_back(out.conditions.embeddings[i]);
    }
    if (!crops.empty()) out.l_fs = face_similarity_loss(targets, crops, oracle);
    out.total = out.l_fs.ptr() && config.lambda > 0.0 ? total_loss(out.l_fm, out.l_fs, config.lambda)
                                                     : out.l_fm;
    return out;
}

Trainer::Trainer(ExperimentConfig config) : config_(std::move(config)) {
    config_.validate();
    model_ = std::make_unique<DiTModel>(config_.model_config(), derive_seed(config_.seed, kModelStream));
    optimizer_ = std::make_unique<AdamW>(model_->params(), config_.optimizer());
    if (!config_.data_path.empty())
        dataset_ = load_dataset(config_.data_path);
    else
        dataset_ = generate_dataset(config_.scene_spec(), config_.dataset_size,
                                    derive_seed(config_.seed, kDataStream));
    if (dataset_.empty()) throw ConfigError("training dataset is empty");
    for (const auto& s : dataset_)
        if (image_height(s.image) != config_.image_size)
            throw ConfigError("dataset image size does not match the configuration");
}

TrainLogRow Trainer::train_step() {
    const long k = step_ + 1;
    Rng rng(derive_seed(config_.seed, kTrainStream, static_cast<std::uint64_t>(k)));
    const std::size_t index = rng() % dataset_.size();
    const SyntheticScene& scene = dataset_[index];
    const double p = curriculum_probability(k - 1, config_.schedule());

    model_->params().zero_grad();
    StepLosses losses = example_losses(*model_, scene, config_, oracle_, p, rng);

    TrainLogRow row;
    row.step = k;
    row.l_fm = losses.l_fm.item();
    row.l_fs = losses.l_fs.ptr() ? losses.l_fs.item() : std::numeric_limits<double>::quiet_NaN();
    row.l = losses.total.item();
    row.p_replace = p;
    if (!std::isfinite(row.l) || (losses.l_fs.ptr() && !std::isfinite(row.l_fs))) {
        const std::string dir = config_.out + "/nonfinite_step" + std::to_string(k);
        dump_batch(dir, scene, index, losses, k);
        throw NonFiniteError("non-finite loss at step " + std::to_string(k) + "; batch dumped to " + dir);
    }
    ad::backward(losses.total);
    optimizer_->step();
    step_ = k;
    return row;
}

void Trainer::save(const std::string& path) const { save_checkpoint(path, model_->params(), optimizer_.get(), step_); }

void Trainer::resume(const std::string& path) {
    step_ = load_checkpoint(path, model_->params(), optimizer_.get());
}

std::string git_describe() { return IDCANVAS_GIT_DESCRIBE; }

void write_manifest(const ExperimentConfig& config, const std::string& command) {
    fs::create_directories(config.out);
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::ofstream m(config.out + "/manifest.txt");
    m << "command=" << command << "\n"
      << "config_hash=" << config_hash(config) << "\n"
      << "seed=" << config.seed << "\n"
      << "git_describe=" << git_describe() << "\n"
      << "started_unix=" << tt << "\n"
      << "started_utc=" << std::put_time(std::gmtime(&tt), "%Y-%m-%dT%H:%M:%SZ") << "\n";
    std::ofstream c(config.out + "/config.txt");
    c << config.to_text();
}

void write_train_log(const std::string& path, const std::vector<TrainLogRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "step,L_fm,L_fs,L,p_replace,wallclock_s\n";
    for (const auto& r : rows)
        out << r.step << ',' << format_double(r.l_fm) << ',' << format_double(r.l_fs) << ','
            << format_double(r.l) << ',' << format_double(r.p_replace) << ','
            << format_double(r.wallclock_s) << '\n';
}

std::vector<TrainLogRow> read_train_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::string line;
    std::getline(in, line);
    std::vector<TrainLogRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string f[6];
        for (auto& x : f) std::getline(ss, x, ',');
        TrainLogRow r;
        r.step = std::stol(f[0]);
        r.l_fm = std::stod(f[1]);
        r.l_fs = std::stod(f[2]);
        r.l = std::stod(f[3]);
        r.p_replace = std::stod(f[4]);
        r.wallclock_s = std::stod(f[5]);
        rows.push_back(r);
    }
    return rows;
}

TrainResult run_train(const ExperimentConfig& config, const std::string& resume_from) {
    write_manifest(config, resume_from.empty() ? "train" : "train --resume " + resume_from);
    Trainer trainer(config);
    TrainResult result;
    const std::string log_path = config.out + "/train_log.csv";
    if (!resume_from.empty()) {
        trainer.resume(resume_from);
        if (fs::exists(log_path))
            for (const auto& r : read_train_log(log_path))
                if (r.step <= trainer.step()) result.log.push_back(r);
        log_info("resumed at step " + std::to_string(trainer.step()));
    }

    const auto start = std::chrono::steady_clock::now();
    write_train_log(log_path, result.log);
    std::ofstream append(log_path, std::ios::app);
    while (trainer.step() < config.steps) {
        TrainLogRow row = trainer.train_step();
        row.wallclock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        append << row.step << ',' << format_double(row.l_fm) << ',' << format_double(row.l_fs) << ','
               << format_double(row.l) << ',' << format_double(row.p_replace) << ','
               << format_double(row.wallclock_s) << '\n';
        result.log.push_back(row);
        if (config.checkpoint_every > 0 && row.step % config.checkpoint_every == 0) {
            append.flush();
            trainer.save(config.out + "/checkpoint_" + std::to_string(row.step) + ".bin");
        }
        if (row.step % 500 == 0)
            log_info("step " + std::to_string(row.step) + " L_fm " + format_double(row.l_fm));
    }
    result.final_checkpoint = config.out + "/checkpoint_final.bin";
    trainer.save(result.final_checkpoint);
    return result;
}

std::unique_ptr<DiTModel> load_model(const ExperimentConfig& config, const std::string& checkpoint) {
    auto model = std::make_unique<DiTModel>(config.model_config(), derive_seed(config.seed, kModelStream));
    load_checkpoint(checkpoint, model->params(), nullptr);
    return model;
}

std::vector<IdentityCondition> inference_conditions(const SyntheticScene& scene,
                                                    const ExperimentConfig& config,
                                                    const OracleEmbedder& oracle) {
    std::vector<IdentityCondition> out;
    const DiTConfig mc = config.model_config();
    for (const auto& id : scene.identities)
        out.push_back(make_identity_condition(FacePatch::opaque(id.reference), id.reference_landmarks,
                                              id.image_landmarks, oracle.embed(id.reference), mc));
    return out;
}

Tensor sample_scene(const DiTModel& model, const SyntheticScene& scene,
                    const std::vector<IdentityCondition>& identities, std::size_t steps,
                    double cfg_scale, std::uint64_t seed) {
    const std::size_t s = model.config().image_size;
    Rng rng(derive_seed(seed, kSampleStream));
    Tensor x1 = gaussian_like(Tensor({s, s, model.config().channels}), rng);
    return from_model_space(
        euler_sample(model_field(model, scene.prompt, identities), std::move(x1), steps, cfg_scale));
}

std::vector<SyntheticScene> heldout_scenes(const ExperimentConfig& config, std::size_t n) {
    return generate_dataset(config.scene_spec(), n, kHeldoutSeed, 2);
}

HeldoutEvaluation evaluate_heldout(const DiTModel& model, const ExperimentConfig& config,
                                   const OracleEmbedder& oracle,
                                   const std::vector<SyntheticScene>& scenes) {
    HeldoutEvaluation ev;
    std::vector<EvalCase> cases;
    double lfs_sum = 0.0;
    std::size_t lfs_count = 0;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        const SyntheticScene& scene = scenes[i];
        const auto conds = inference_conditions(scene, config, oracle);
        std::vector<Tensor> refs;
        for (const auto& c : conds) refs.push_back(c.embedding);

        const Tensor img = sample_scene(model, scene, conds, config.sample_steps, config.cfg_scale,
                                        derive_seed(kHeldoutSeed, i));
        ev.samples.push_back(img);
        for (std::size_t a = 0; a < scene.identities.size(); ++a) {
            const Tensor e = oracle.embed(crop_image(img, scene.identities[a].box));
            const double own = cosine_sim(e, refs[a]);
            double best_other = -2.0;
            for (std::size_t b = 0; b < scene.identities.size(); ++b)
                if (b != a) best_other = std::max(best_other, cosine_sim(e, refs[b]));
            ++ev.slots;
            if (own > best_other) ++ev.correct;
        }
        EvalCase c;
        c.case_id = "heldout" + std::to_string(i);
        c.generated = img;
        c.ground_truth = scene.image;
        for (const auto& id : scene.identities) {
            c.boxes.push_back(id.box);
            c.references.push_back(id.reference);
        }
        cases.push_back(std::move(c));

        const Tensor x0 = to_model_space(scene.image);
        for (std::size_t k = 0; k < std::size(kHeldoutTimes); ++k) {
            Rng rng(derive_seed(kHeldoutSeed, i, k));
            const double t = kHeldoutTimes[k];
            const Tensor x_t = interpolate(x0, gaussian_like(x0, rng), t);
            ModelInput in{x_t, t, scene.prompt, conds};
            const ad::Var x0_hat = one_step_estimate(ad::constant(x_t), t, model.forward(in));
            std::vector<ad::Var> crops;
            for (const auto& id : scene.identities) crops.push_back(crop_face(x0_hat, id.box));
            lfs_sum += face_similarity_loss(refs, crops, oracle).item();
            ++lfs_count;
        }
    }
    ev.localisation_rate = ev.slots ? static_cast<double>(ev.correct) / static_cast<double>(ev.slots) : 0.0;
    ev.mean_l_fs = lfs_count ? lfs_sum / static_cast<double>(lfs_count) : 0.0;
    ev.report = evaluate_run(cases, oracle, {config.sim_gt_min, config.sim_ref_min});
    return ev;
}

std::size_t worker_count() {
    if (const char* env = std::getenv("IDCANVAS_THREADS")) {
        const long n = std::strtol(env, nullptr, 10);
        if (n >= 1) return static_cast<std::size_t>(n);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void run_parallel(const std::vector<std::function<void()>>& tasks) {
    const std::size_t workers = std::min(worker_count(), tasks.size());
    if (workers <= 1) {
        for (const auto& t : tasks) t();
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(tasks.size());
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < tasks.size(); i = next++) {
                try {
                    tasks[i]();
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace idcanvas
