#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "idcanvas/config.hpp"
#include "idcanvas/metrics.hpp"

namespace idcanvas {

struct TrainLogRow {
    long step = 0;
    double l_fm = 0.0;
    double l_fs = 0.0;  // NaN when every identity of the step was dropped
    double l = 0.0;
    double p_replace = 0.0;
    double wallclock_s = 0.0;
};

// Loss terms of one example with the graph still attached, plus what went
// into it (kept for diagnostics).
struct StepLosses {
    ad::Var l_fm;
    ad::Var l_fs;  // empty when no identity survived dropout
    ad::Var total;
    double t = 0.0;
    Tensor x_t;
    PreparedConditions conditions;
};

// Forward pass and losses for one scene. `rng` drives t, noise and the
// condition preparation.
StepLosses example_losses(const DiTModel& model, const SyntheticScene& scene,
                          const ExperimentConfig& config, const OracleEmbedder& oracle,
                          double p_replace, Rng& rng);

// Owns the model, optimizer and dataset of a run. Step k (1-based) draws
// all of its randomness from derive_seed(seed, k), so resuming from a
// checkpoint continues the exact same stream.
class Trainer {
   public:
    explicit Trainer(ExperimentConfig config);

    const ExperimentConfig& config() const { return config_; }
    DiTModel& model() { return *model_; }
    const DiTModel& model() const { return *model_; }
    AdamW& optimizer() { return *optimizer_; }
    const std::vector<SyntheticScene>& dataset() const { return dataset_; }
    const OracleEmbedder& oracle() const { return oracle_; }
    long step() const { return step_; }

    // One optimisation step; throws NonFiniteError after dumping the batch.
    TrainLogRow train_step();

    void save(const std::string& path) const;
    void resume(const std::string& path);

   private:
    ExperimentConfig config_;
    std::unique_ptr<DiTModel> model_;
    std::unique_ptr<AdamW> optimizer_;
    std::vector<SyntheticScene> dataset_;
    OracleEmbedder oracle_;
    long step_ = 0;
};

struct TrainResult {
    std::vector<TrainLogRow> log;
    std::string final_checkpoint;
};

// Writes <out>/manifest.txt first, then config.txt, train_log.csv,
// checkpoint_<step>.bin every checkpoint_every steps and checkpoint_final.bin.
// With `resume_from`, training continues from that checkpoint and the log
// keeps its rows up to the resumed step.
TrainResult run_train(const ExperimentConfig& config, const std::string& resume_from = "");

void write_manifest(const ExperimentConfig& config, const std::string& command);
std::string git_describe();

void write_train_log(const std::string& path, const std::vector<TrainLogRow>& rows);
std::vector<TrainLogRow> read_train_log(const std::string& path);

// Model with its parameters restored from a checkpoint.
std::unique_ptr<DiTModel> load_model(const ExperimentConfig& config, const std::string& checkpoint);

// Conditions for inference: the scene's own references, no replacement,
// degradation or dropout.
std::vector<IdentityCondition> inference_conditions(const SyntheticScene& scene,
                                                    const ExperimentConfig& config,
                                                    const OracleEmbedder& oracle);

// Euler sample in [0,1] pixel space from noise seeded by `seed`.
Tensor sample_scene(const DiTModel& model, const SyntheticScene& scene,
                    const std::vector<IdentityCondition>& identities, std::size_t steps,
                    double cfg_scale, std::uint64_t seed);

inline constexpr std::uint64_t kHeldoutSeed = 0x4e1d0;

// n two-identity scenes shared by every run.
std::vector<SyntheticScene> heldout_scenes(const ExperimentConfig& config, std::size_t n);

struct HeldoutEvaluation {
    std::size_t slots = 0;
    std::size_t correct = 0;        // own-identity cosine beats the swapped one
    double localisation_rate = 0.0;
    double mean_l_fs = 0.0;         // one-step-estimate face loss, fixed t grid
    EvalReport report;
    std::vector<Tensor> samples;    // pixel space, one per scene
};

HeldoutEvaluation evaluate_heldout(const DiTModel& model, const ExperimentConfig& config,
                                   const OracleEmbedder& oracle,
                                   const std::vector<SyntheticScene>& scenes);

// Runs tasks on up to IDCANVAS_THREADS workers (default: hardware threads).
void run_parallel(const std::vector<std::function<void()>>& tasks);
std::size_t worker_count();

}  // namespace idcanvas
