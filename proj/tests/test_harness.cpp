#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "idcanvas/ablation.hpp"
#include "idcanvas/checkpoint.hpp"
#include "idcanvas/errors.hpp"
#include "idcanvas/log.hpp"
#include "idcanvas/train.hpp"

using namespace idcanvas;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_run(const std::string& name) {
    ExperimentConfig c;
    c.image_size = 32;
    c.patch = 4;
    c.width = 16;
    c.blocks = 2;
    c.heads = 1;
    c.id_hidden = 16;
    c.mlp_ratio = 2;
    c.box_sizes = {8, 12};
    c.max_identities = 2;
    c.dataset_size = 16;
    c.steps = 40;
    c.checkpoint_every = 20;
    c.sample_steps = 4;
    c.eval_scenes = 2;
    c.out = (fs::temp_directory_path() / ("idcanvas_test_" + name)).string();
    fs::remove_all(c.out);
    return c;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool same_losses(const TrainLogRow& a, const TrainLogRow& b) {
    auto eq = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
    return a.step == b.step && eq(a.l_fm, b.l_fm) && eq(a.l_fs, b.l_fs) && eq(a.l, b.l) &&
           a.p_replace == b.p_replace;
}

}  // namespace

TEST_CASE("generate_dataset is deterministic and respects its invariants") {
    SceneSpec spec;
    const auto a = generate_dataset(spec, 30, 7);
    const auto b = generate_dataset(spec, 30, 7);
    const auto path_a = (fs::temp_directory_path() / "idcanvas_ds_a.bin").string();
    const auto path_b = (fs::temp_directory_path() / "idcanvas_ds_b.bin").string();
    save_dataset(path_a, a);
    save_dataset(path_b, b);
    CHECK(slurp(path_a) == slurp(path_b));

    const auto loaded = load_dataset(path_a);
    REQUIRE(loaded.size() == a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(loaded[i].image == a[i].image);
        CHECK(loaded[i].prompt == a[i].prompt);
        REQUIRE(loaded[i].identities.size() == a[i].identities.size());
        for (std::size_t k = 0; k < a[i].identities.size(); ++k) {
            CHECK(loaded[i].identities[k].box == a[i].identities[k].box);
            CHECK(loaded[i].identities[k].reference == a[i].identities[k].reference);
        }
    }
    fs::remove(path_a);
    fs::remove(path_b);

    const OracleEmbedder oracle;
    for (const auto& s : a) {
        CHECK(s.identities.size() >= 1);
        CHECK(s.identities.size() <= 4);
        CHECK_NOTHROW(s.validate());
        for (const auto& id : s.identities) {
            CHECK(id.box.x0 % spec.patch == 0);
            CHECK(id.box.y0 % spec.patch == 0);
            const double c = cosine_sim(oracle.embed(crop_image(s.image, id.box)), oracle.embed(id.reference));
            CHECK(c > 0.9);
            // references carry their own nuisance, never the GT pixels
            if (id.box.w == spec.reference_size) CHECK_FALSE(crop_image(s.image, id.box) == id.reference);
        }
    }
}

TEST_CASE("scene boxes never overlap") {
    SceneSpec spec;
    spec.max_identities = 6;
    spec.min_identities = 6;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        Rng rng(seed);
        const SyntheticScene s = generate_scene(spec, rng);
        for (std::size_t i = 0; i < s.identities.size(); ++i)
            for (std::size_t j = 0; j < i; ++j) CHECK_FALSE(s.identities[i].box.overlaps(s.identities[j].box));
    }
}

TEST_CASE("single-identity scenes give exactly one masked region") {
    SceneSpec spec;
    ExperimentConfig cfg;
    const OracleEmbedder oracle;
    for (const auto& s : generate_dataset(spec, 10, 3, 1)) {
        REQUIRE(s.identities.size() == 1);
        const auto conds = inference_conditions(s, cfg, oracle);
        std::size_t masked = 0;
        for (auto b : conds[0].token_mask) masked += b;
        const Box& box = s.identities[0].box;
        CHECK(masked == (box.w / spec.patch) * (box.h / spec.patch));
    }
}

TEST_CASE("infeasible packing is reported") {
    SceneSpec spec;
    spec.image_size = 16;
    spec.box_sizes = {12};
    spec.min_identities = 2;
    spec.max_identities = 2;
    Rng rng(1);
    CHECK_THROWS_AS(generate_scene(spec, rng), ConfigError);
    spec.box_sizes = {10};
    CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("config text round trip, overrides and errors") {
    ExperimentConfig c;
    c.lambda = 0.25;
    c.box_sizes = {8, 12};
    c.curriculum = "custom";
    c.milestones = {5, 10};
    c.probabilities = {0.0, 0.1, 0.3};
    ExperimentConfig d;
    d.apply_text(c.to_text());
    CHECK(d.to_text() == c.to_text());
    CHECK(config_hash(d) == config_hash(c));
    d.apply("seed", "9");
    CHECK(config_hash(d) != config_hash(c));

    ExperimentConfig e;
    e.apply_text("# comment\n\nsteps = 12\nlambda=0\n");
    CHECK(e.steps == 12);
    CHECK(e.lambda == 0.0);
    CHECK_THROWS_AS(e.apply("no_such_key", "1"), ConfigError);
    CHECK_THROWS_AS(e.apply("steps", "twelve"), ConfigError);
    CHECK_THROWS_AS(e.apply_text("steps"), ConfigError);
    e.apply("heads", "3");
    CHECK_THROWS_AS(e.validate(), ConfigError);
    ExperimentConfig f;
    f.apply("dropout", "1.5");
    CHECK_THROWS_AS(f.validate(), ConfigError);
    ExperimentConfig g;
    g.apply("curriculum", "custom");
    g.apply("milestones", "5,10");
    g.apply("probabilities", "0.2,0.1,0.3");
    CHECK_THROWS_AS(g.validate(), ConfigError);
}

TEST_CASE("checkpoint round trip and shape mismatch") {
    const ExperimentConfig c = tiny_run("ckpt");
    fs::create_directories(c.out);
    Trainer tr(c);
    tr.train_step();
    const std::string path = c.out + "/ck.bin";
    tr.save(path);

    Trainer other(c);
    other.resume(path);
    CHECK(other.step() == 1);
    for (std::size_t i = 0; i < tr.model().params().count(); ++i)
        CHECK(other.model().params().all()[i].value() == tr.model().params().all()[i].value());
    CHECK(other.optimizer().first_moments() == tr.optimizer().first_moments());

    ExperimentConfig wider = c;
    wider.width = 32;
    wider.heads = 2;
    wider.id_hidden = 32;
    CHECK_THROWS_AS(load_model(wider, path), ConfigError);
    CHECK_THROWS_AS(load_model(c, c.out + "/missing.bin"), ConfigError);
    fs::remove_all(c.out);
}

TEST_CASE("run_train: loss decreases, logs L_fs, writes artifacts") {
    ExperimentConfig c = tiny_run("smoke");
    c.steps = 200;
    c.lambda = 0.0;
    c.checkpoint_every = 100;
    set_log_level(LogLevel::Warn);
    const TrainResult r = run_train(c);
    set_log_level(LogLevel::Info);
    REQUIRE(r.log.size() == 200);
    double first = 0.0;
    for (std::size_t i = 0; i < 10; ++i) first += r.log[i].l_fm / 10.0;
    CHECK(r.log.back().l_fm < first);
    std::size_t finite_fs = 0;
    for (const auto& row : r.log) {
        if (std::isfinite(row.l_fs)) ++finite_fs;
        CHECK(row.l == row.l_fm);  // lambda = 0: monitored, not optimised
    }
    CHECK(finite_fs > 150);
    CHECK(fs::exists(c.out + "/manifest.txt"));
    CHECK(fs::exists(c.out + "/checkpoint_100.bin"));
    CHECK(fs::exists(c.out + "/checkpoint_final.bin"));
    const std::string manifest = slurp(c.out + "/manifest.txt");
    CHECK(manifest.find("config_hash=" + config_hash(c)) != std::string::npos);
    CHECK(manifest.find("git_describe=") != std::string::npos);
    const auto header = slurp(c.out + "/train_log.csv").substr(0, 38);
    CHECK(header == "step,L_fm,L_fs,L,p_replace,wallclock_s");
    fs::remove_all(c.out);
}

TEST_CASE("training is reproducible and resumable") {
    ExperimentConfig c = tiny_run("det_a");
    set_log_level(LogLevel::Warn);
    const TrainResult a = run_train(c);
    ExperimentConfig c2 = c;
    const TrainResult b = run_train(c2);
    REQUIRE(a.log.size() == b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(same_losses(a.log[i], b.log[i]));

    // resume from the step-20 checkpoint of the same run directory
    const TrainResult resumed = run_train(c, c.out + "/checkpoint_20.bin");
    set_log_level(LogLevel::Info);
    REQUIRE(resumed.log.size() == a.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(same_losses(a.log[i], resumed.log[i]));
    const auto on_disk = read_train_log(c.out + "/train_log.csv");
    REQUIRE(on_disk.size() == a.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(same_losses(a.log[i], on_disk[i]));
    fs::remove_all(c.out);
}

TEST_CASE("non-finite loss aborts with a batch dump") {
    ExperimentConfig c = tiny_run("nonfinite");
    fs::create_directories(c.out);
    Trainer tr(c);
    tr.model().params().get("head.bias").value()[0] = std::numeric_limits<double>::infinity();
    set_log_level(LogLevel::Silent);
    CHECK_THROWS_AS(tr.train_step(), NonFiniteError);
    set_log_level(LogLevel::Info);
    CHECK(fs::exists(c.out + "/nonfinite_step1/batch.txt"));
    CHECK(fs::exists(c.out + "/nonfinite_step1/ground_truth.ppm"));
    fs::remove_all(c.out);
}

TEST_CASE("sampling is deterministic per seed") {
    const ExperimentConfig c = tiny_run("sample");
    fs::create_directories(c.out);
    Trainer tr(c);
    const SyntheticScene& scene = tr.dataset()[0];
    const auto conds = inference_conditions(scene, c, tr.oracle());
    const Tensor a = sample_scene(tr.model(), scene, conds, 3, 1.0, 5);
    CHECK(a == sample_scene(tr.model(), scene, conds, 3, 1.0, 5));
    CHECK_FALSE(a == sample_scene(tr.model(), scene, conds, 3, 1.0, 6));
    fs::remove_all(c.out);
}

TEST_CASE("run_parallel runs every task and propagates errors") {
    std::vector<int> hits(8, 0);
    std::vector<std::function<void()>> tasks;
    for (std::size_t i = 0; i < hits.size(); ++i) tasks.push_back([&hits, i] { hits[i] = 1; });
    run_parallel(tasks);
    for (int h : hits) CHECK(h == 1);
    CHECK_THROWS_AS(run_parallel({[] { throw ConfigError("boom"); }}), ConfigError);
}

TEST_CASE("conditioned and unconditioned samples differ after training") {
    ExperimentConfig c = tiny_run("cond_uncond");
    set_log_level(LogLevel::Warn);
    const TrainResult r = run_train(c);
    set_log_level(LogLevel::Info);
    const auto model = load_model(c, r.final_checkpoint);
    const OracleEmbedder oracle;
    const SyntheticScene scene = heldout_scenes(c, 1)[0];
    const auto conds = inference_conditions(scene, c, oracle);
    const Tensor cond = sample_scene(*model, scene, conds, c.sample_steps, 1.0, 3);
    const Tensor uncond = sample_scene(*model, scene, {}, c.sample_steps, 1.0, 3);
    CHECK(max_abs_diff(cond, uncond) > 1e-3);
    fs::remove_all(c.out);
}

TEST_CASE("ablation suites") {
    const ExperimentConfig base;
    CHECK(ablation_variants("attention_mask", base, "x").size() == 2);
    CHECK(ablation_variants("attention_mask", base, "x")[1].config.attention == "all_visible");
    const auto cur = ablation_variants("curriculum", base, "x");
    REQUIRE(cur.size() == 2);
    CHECK(cur[1].config.schedule().probabilities == std::vector<double>{0.5});
    const auto sweep = ablation_variants("lambda_sweep", base, "x");
    std::vector<double> lambdas;
    for (const auto& v : sweep) lambdas.push_back(v.config.lambda);
    CHECK(lambdas == std::vector<double>{0.0, 1e-3, 1e-2, 1e-1, 1.0, 10.0});
    const auto comp = ablation_variants("components", base, "x");
    REQUIRE(comp.size() == 4);
    CHECK_FALSE(comp[0].config.identity_modulation);
    CHECK_FALSE(comp[0].config.replacement);
    CHECK(comp[1].config.identity_modulation);
    CHECK(comp[2].config.replacement);
    CHECK(comp[2].config.lambda == 0.0);
    CHECK(comp[3].config.lambda == 0.1);
    // variants differ only in the ablated axis
    for (const auto& suite : ablation_suites())
        for (const auto& v : ablation_variants(suite, base, "x")) {
            CHECK(v.config.seed == base.seed);
            CHECK(v.config.steps == base.steps);
            CHECK(v.config.out == "x/" + suite + "/" + v.name);
        }
    CHECK_THROWS_AS(ablation_variants("nope", base, "x"), ConfigError);

    ExperimentConfig tiny = tiny_run("ablate");
    tiny.steps = 6;
    tiny.checkpoint_every = 100;
    set_log_level(LogLevel::Warn);
    const auto rows = run_ablation("attention_mask", tiny, tiny.out);
    set_log_level(LogLevel::Info);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].config_hash != rows[1].config_hash);
    const std::string csv = slurp(tiny.out + "/ablation_attention_mask.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    fs::remove_all(tiny.out);
}
