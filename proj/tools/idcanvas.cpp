// idcanvas command-line harness.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "idcanvas/ablation.hpp"
#include "idcanvas/errors.hpp"
#include "idcanvas/image.hpp"
#include "idcanvas/log.hpp"
#include "idcanvas/selfcheck.hpp"
#include "idcanvas/train.hpp"

using namespace idcanvas;
namespace fs = std::filesystem;

namespace {

struct CommonFlags {
    std::string config_file;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<long> steps;
    std::optional<double> lambda;
    std::optional<double> cfg_scale;
    std::optional<std::string> out;
    bool quiet = false;

    void attach(CLI::App* app) {
        app->add_option("--config", config_file, "key=value config file");
        app->add_option("--set", sets, "extra key=value override (repeatable)");
        app->add_option("--seed", seed);
        app->add_option("--steps", steps, "training steps");
        app->add_option("--lambda", lambda, "face-similarity loss weight");
        app->add_option("--cfg-scale", cfg_scale, "classifier-free guidance scale");
        app->add_option("--out", out, "output directory");
        app->add_flag("--quiet", quiet, "warnings and errors only");
    }

    // defaults < file < --set < named flags
    ExperimentConfig resolve() const {
        ExperimentConfig c = config_file.empty() ? ExperimentConfig{} : ExperimentConfig::from_file(config_file);
        for (const auto& kv : sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
            c.apply(kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (seed) c.seed = *seed;
        if (steps) c.steps = *steps;
        if (lambda) c.lambda = *lambda;
        if (cfg_scale) c.cfg_scale = *cfg_scale;
        if (out) c.out = *out;
        c.validate();
        if (quiet) set_log_level(LogLevel::Warn);
        return c;
    }
};

std::string checkpoint_or_default(const std::string& given, const ExperimentConfig& c) {
    return given.empty() ? c.out + "/checkpoint_final.bin" : given;
}

int cmd_gen_data(const ExperimentConfig& c, std::size_t count, std::size_t identities, std::size_t previews) {
    fs::create_directories(c.out);
    const auto data = generate_dataset(c.scene_spec(), count, c.seed, identities);
    const std::string path = c.out + "/dataset.bin";
    save_dataset(path, data);
    for (std::size_t i = 0; i < std::min(previews, data.size()); ++i) {
        std::vector<Tensor> strip{data[i].image};
        for (const auto& id : data[i].identities) strip.push_back(id.reference);
        write_ppm(c.out + "/scene_" + std::to_string(i) + ".ppm", hstack_images(strip));
    }
    std::cout << "wrote " << data.size() << " scenes to " << path << "\n";
    return 0;
}

int cmd_train(const ExperimentConfig& c, const std::string& resume) {
    const TrainResult r = run_train(c, resume);
    std::cout << "trained " << r.log.size() << " steps, final checkpoint " << r.final_checkpoint << "\n";
    return 0;
}

int cmd_sample(const ExperimentConfig& c, const std::string& checkpoint, std::size_t scenes,
               std::optional<std::size_t> sample_steps, std::uint64_t noise_seed) {
    const auto model = load_model(c, checkpoint);
    const OracleEmbedder oracle;
    const std::size_t steps = sample_steps.value_or(c.sample_steps);
    const auto held = heldout_scenes(c, scenes);
    const std::string dir = c.out + "/samples";
    fs::create_directories(dir);
    for (std::size_t i = 0; i < held.size(); ++i) {
        const auto conds = inference_conditions(held[i], c, oracle);
        const std::uint64_t seed = derive_seed(noise_seed, i);
        const Tensor cond = sample_scene(*model, held[i], conds, steps, c.cfg_scale, seed);
        const Tensor uncond = sample_scene(*model, held[i], {}, steps, 1.0, seed);
        // generated | unconditional | ground truth | one canvas per identity
        std::vector<Tensor> strip{cond, uncond, held[i].image};
        for (const auto& k : conds) strip.push_back(from_model_space(k.canvas));
        write_ppm(dir + "/sample_" + std::to_string(i) + ".ppm", hstack_images(strip));
        write_ppm(dir + "/generated_" + std::to_string(i) + ".ppm", cond);
    }
    std::cout << "wrote " << held.size() << " samples (" << steps << " steps, cfg " << c.cfg_scale << ") to "
              << dir << "\n";
    return 0;
}

int cmd_eval(const ExperimentConfig& c, const std::string& checkpoint) {
    const auto model = load_model(c, checkpoint);
    const OracleEmbedder oracle;
    const HeldoutEvaluation ev = evaluate_heldout(*model, c, oracle, heldout_scenes(c, c.eval_scenes));
    fs::create_directories(c.out);
    write_report_csv(c.out + "/eval_report.csv", ev.report.records);
    const auto& s = ev.report.summary;
    std::ofstream out(c.out + "/eval_summary.csv");
    out << "scenes,slots,localisation,mean_L_fs,scored,mean_sim_gt,mean_sim_ref,cp_eligible,mean_cp,"
           "quality_eligible\n"
        << std::setprecision(17) << c.eval_scenes << ',' << ev.slots << ',' << ev.localisation_rate << ','
        << ev.mean_l_fs << ',' << s.scored << ',' << s.mean_sim_gt << ',' << s.mean_sim_ref << ','
        << s.cp_eligible << ',' << s.mean_cp << ',' << s.quality_eligible << '\n';
    std::cout << std::setprecision(4) << "localisation " << ev.localisation_rate << "  mean L_fs " << ev.mean_l_fs
              << "  sim_gt " << s.mean_sim_gt << "  sim_ref " << s.mean_sim_ref << "  cp " << s.mean_cp << " ("
              << s.cp_eligible << " eligible)\n";
    return 0;
}

int cmd_ablate(const ExperimentConfig& c, const std::string& suite) {
    std::vector<std::string> suites = suite == "all" ? ablation_suites() : std::vector<std::string>{suite};
    for (const auto& name : suites) {
        const auto rows = run_ablation(name, c, c.out);
        std::cout << name << ":\n";
        for (const auto& r : rows)
            std::cout << "  " << std::left << std::setw(16) << r.variant << std::setprecision(4)
                      << " loc " << r.localisation_rate << "  L_fs " << r.mean_l_fs << "  L_fm " << r.final_l_fm
                      << "  cp " << r.mean_cp << "\n";
    }
    return 0;
}

int cmd_check() {
    int failures = 0;
    for (const auto& line : run_self_checks()) {
        std::cout << (line.pass ? "[PASS] " : "[FAIL] ") << line.name << ": " << line.detail << "\n";
        failures += !line.pass;
    }
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Identity-conditioned location-canvas diffusion toy"};
    app.require_subcommand(1);

    CommonFlags gen_flags, train_flags, sample_flags, eval_flags, ablate_flags;

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic scene dataset");
    gen_flags.attach(gen);
    std::optional<std::size_t> count;
    std::size_t identities = 0, previews = 4;
    gen->add_option("--count", count, "number of scenes (default: dataset_size)");
    gen->add_option("--identities", identities, "identities per scene, 0 for random");
    gen->add_option("--previews", previews, "scene previews written as PPM");

    auto* train = app.add_subcommand("train", "train a model");
    train_flags.attach(train);
    std::string resume;
    train->add_option("--resume", resume, "checkpoint to continue from");

    auto* sample = app.add_subcommand("sample", "sample held-out scenes");
    sample_flags.attach(sample);
    std::string sample_ckpt;
    std::size_t sample_scenes = 4;
    std::optional<std::size_t> sample_steps;
    std::uint64_t noise_seed = 0;
    sample->add_option("--checkpoint", sample_ckpt, "default <out>/checkpoint_final.bin");
    sample->add_option("--scenes", sample_scenes);
    sample->add_option("--sample-steps", sample_steps, "Euler steps (default: sample_steps = 28)");
    sample->add_option("--noise-seed", noise_seed);

    auto* eval = app.add_subcommand("eval", "score a checkpoint on held-out scenes");
    eval_flags.attach(eval);
    std::string eval_ckpt;
    std::optional<double> sim_gt_min, sim_ref_min;
    eval->add_option("--checkpoint", eval_ckpt, "default <out>/checkpoint_final.bin");
    eval->add_option("--sim-gt-min", sim_gt_min, "ranking threshold on Sim(GT)");
    eval->add_option("--sim-ref-min", sim_ref_min, "ranking threshold on Sim(Ref)");

    auto* ablate = app.add_subcommand("ablate", "train and compare matched variants");
    ablate_flags.attach(ablate);
    std::string suite = "all";
    ablate->add_option("--suite", suite)->check(
        CLI::IsMember({"all", "attention_mask", "curriculum", "lambda_sweep", "components"}));

    auto* check = app.add_subcommand("check", "run the gradient and oracle self-checks");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*gen) {
            const ExperimentConfig c = gen_flags.resolve();
            return cmd_gen_data(c, count.value_or(c.dataset_size), identities, previews);
        }
        if (*train) return cmd_train(train_flags.resolve(), resume);
        if (*sample) {
            const ExperimentConfig c = sample_flags.resolve();
            return cmd_sample(c, checkpoint_or_default(sample_ckpt, c), sample_scenes, sample_steps, noise_seed);
        }
        if (*eval) {
            ExperimentConfig c = eval_flags.resolve();
            if (sim_gt_min) c.sim_gt_min = *sim_gt_min;
            if (sim_ref_min) c.sim_ref_min = *sim_ref_min;
            c.validate();
            return cmd_eval(c, checkpoint_or_default(eval_ckpt, c));
        }
        if (*ablate) return cmd_ablate(ablate_flags.resolve(), suite);
        if (*check) return cmd_check();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
