#include "idcanvas/ablation.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>

#include "idcanvas/errors.hpp"
#include "idcanvas/log.hpp"
#include "idcanvas/train.hpp"

namespace idcanvas {

const std::vector<std::string>& ablation_suites() {
    static const std::vector<std::string> suites{"attention_mask", "curriculum", "lambda_sweep", "components"};
    return suites;
}

std::vector<AblationVariant> ablation_variants(const std::string& suite, const ExperimentConfig& base,
                                               const std::string& out_dir) {
    std::vector<AblationVariant> v;
    auto add = [&](const std::string& name, ExperimentConfig c) {
        c.out = out_dir + "/" + suite + "/" + name;
        v.push_back({name, std::move(c)});
    };
    if (suite == "attention_mask") {
        ExperimentConfig c = base;
        c.attention = "isolated";
        add("isolated", c);
        c.attention = "all_visible";
        add("all_visible", c);
    } else if (suite == "curriculum") {
        ExperimentConfig c = base;
        c.replacement = true;
        c.curriculum = "compressed";
        add("curriculum", c);
        c.curriculum = "fixed";
        c.fixed_p = 0.5;
        add("fixed_0.5", c);
    } else if (suite == "lambda_sweep") {
        for (const char* l : {"0", "0.001", "0.01", "0.1", "1", "10"}) {
            ExperimentConfig c = base;
            c.apply("lambda", l);
            add(std::string("lambda_") + l, c);
        }
    } else if (suite == "components") {
        ExperimentConfig c = base;
        c.identity_modulation = false;
        c.replacement = false;
        c.degrade = false;
        c.lambda = 0.0;
        add("b_location", c);
        c.identity_modulation = true;
        add("c_modulation", c);
        c.replacement = true;
        c.degrade = true;
        add("d_replacement", c);
        c.lambda = base.lambda > 0.0 ? base.lambda : 0.1;
        add("full", c);
    } else {
        throw ConfigError("unknown ablation suite '" + suite + "'");
    }
    for (const auto& var : v) var.config.validate();
    return v;
}

std::vector<AblationRow> run_ablation(const std::string& suite, const ExperimentConfig& base,
                                      const std::string& out_dir) {
    const auto variants = ablation_variants(suite, base, out_dir);
    const auto scenes = heldout_scenes(base, base.eval_scenes);
    std::vector<AblationRow> rows(variants.size());
    std::vector<std::function<void()>> tasks;
    for (std::size_t i = 0; i < variants.size(); ++i)
        tasks.push_back([&, i] {
            const ExperimentConfig& c = variants[i].config;
            log_info("ablation " + suite + ": training " + variants[i].name);
            const TrainResult tr = run_train(c);
            const auto model = load_model(c, tr.final_checkpoint);
            const HeldoutEvaluation ev = evaluate_heldout(*model, c, OracleEmbedder(), scenes);
            AblationRow& r = rows[i];
            r.suite = suite;
            r.variant = variants[i].name;
            r.config_hash = config_hash(c);
            const std::size_t tail = std::min<std::size_t>(100, tr.log.size());
            for (std::size_t k = tr.log.size() - tail; k < tr.log.size(); ++k)
                r.final_l_fm += tr.log[k].l_fm / static_cast<double>(tail);
            r.localisation_rate = ev.localisation_rate;
            r.mean_l_fs = ev.mean_l_fs;
            r.mean_sim_gt = ev.report.summary.mean_sim_gt;
            r.mean_sim_ref = ev.report.summary.mean_sim_ref;
            r.mean_cp = ev.report.summary.mean_cp;
            r.cp_eligible = ev.report.summary.cp_eligible;
        });
    run_parallel(tasks);
    std::filesystem::create_directories(out_dir);
    write_ablation_csv(out_dir + "/ablation_" + suite + ".csv", rows);
    return rows;
}

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << "suite,variant,config_hash,final_L_fm,localisation,mean_L_fs,mean_sim_gt,mean_sim_ref,mean_cp,"
           "cp_eligible\n";
    out << std::setprecision(17);
    for (const auto& r : rows)
        out << r.suite << ',' << r.variant << ',' << r.config_hash << ',' << r.final_l_fm << ','
            << r.localisation_rate << ',' << r.mean_l_fs << ',' << r.mean_sim_gt << ',' << r.mean_sim_ref << ','
            << r.mean_cp << ',' << r.cp_eligible << '\n';
}

}  // namespace idcanvas
