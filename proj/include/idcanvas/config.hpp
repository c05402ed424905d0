#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "idcanvas/dit.hpp"
#include "idcanvas/flow.hpp"
#include "idcanvas/optim.hpp"
#include "idcanvas/scene.hpp"

namespace idcanvas {

// Everything a run depends on. Serialises to a flat key=value file; the
// text form is canonical (sorted keys, round-trip precision) and hashed
// into the run manifest.
struct ExperimentConfig {
    // model
    std::size_t image_size = 64;
    std::size_t patch = 4;
    std::size_t width = 32;
    std::size_t blocks = 3;
    std::size_t heads = 2;
    std::size_t id_hidden = 64;
    std::size_t mlp_ratio = 4;
    double rope_base = 100.0;
    bool identity_modulation = true;
    std::string attention = "isolated";  // isolated | all_visible
    std::string prediction = "clean";    // clean | velocity
    double time_floor = 0.05;

    // data
    std::size_t dataset_size = 2000;
    std::size_t reference_size = 16;
    std::vector<std::size_t> box_sizes{12, 16, 20};
    std::size_t min_identities = 1;
    std::size_t max_identities = 4;
    std::string data_path;  // optional dataset archive; generated from the seed when empty

    // training
    std::uint64_t seed = 0;
    long steps = 3000;
    double lambda = 0.1;
    double lr = 1e-3;
    double weight_decay = 1e-3;
    double dropout = 0.15;
    bool replacement = true;
    std::string curriculum = "compressed";  // compressed | standard | fixed | custom
    double fixed_p = 0.5;
    std::vector<long> milestones;           // custom schedule
    std::vector<double> probabilities;      // custom schedule
    bool degrade = true;
    double degrade_probability = 0.5;
    long checkpoint_every = 1000;

    // sampling / evaluation
    std::size_t sample_steps = 28;
    double cfg_scale = 1.0;
    std::size_t eval_scenes = 50;
    double sim_gt_min = 0.40;
    double sim_ref_min = 0.50;

    std::string out = "runs/default";

    void validate() const;  // ConfigError
    DiTConfig model_config() const;
    SceneSpec scene_spec() const;
    CurriculumSchedule schedule() const;
    AdamWConfig optimizer() const;

    std::string to_text() const;
    // Applies key=value lines (blank lines and '#' comments ignored) on top
    // of the current values. Unknown keys throw ConfigError.
    void apply_text(const std::string& text, const std::string& origin = "<text>");
    void apply(const std::string& key, const std::string& value);

    static ExperimentConfig from_file(const std::string& path);
};

// 64-bit FNV-1a of the canonical text, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

}  // namespace idcanvas
