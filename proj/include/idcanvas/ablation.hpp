#pragma once

#include <string>
#include <utility>
#include <vector>

#include "idcanvas/config.hpp"

namespace idcanvas {

struct AblationVariant {
    std::string name;
    ExperimentConfig config;
};

// Matched configs differing only in the ablated axis. Suites:
//   attention_mask  isolated, all_visible
//   curriculum      compressed curriculum, fixed p = 0.5
//   lambda_sweep    lambda in {0, 1e-3, 1e-2, 1e-1, 1, 10}
//   components      (b) location only, (c) + identity modulation,
//                   (d) + replacement and degradation, full (+ L_fs)
// Each variant writes to <out_dir>/<suite>/<name>. Unknown suite -> ConfigError.
std::vector<AblationVariant> ablation_variants(const std::string& suite, const ExperimentConfig& base,
                                               const std::string& out_dir);
const std::vector<std::string>& ablation_suites();

struct AblationRow {
    std::string suite;
    std::string variant;
    std::string config_hash;
    double final_l_fm = 0.0;  // mean over the last 100 logged steps
    double localisation_rate = 0.0;
    double mean_l_fs = 0.0;
    double mean_sim_gt = 0.0;
    double mean_sim_ref = 0.0;
    double mean_cp = 0.0;
    std::size_t cp_eligible = 0;
};

// Trains every variant (in parallel, see run_parallel), evaluates each on
// base.eval_scenes held-out scenes and writes <out_dir>/ablation_<suite>.csv.
std::vector<AblationRow> run_ablation(const std::string& suite, const ExperimentConfig& base,
                                      const std::string& out_dir);

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows);

}  // namespace idcanvas
