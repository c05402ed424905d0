#pragma once

#include <functional>
#include <span>
#include <vector>

#include "idcanvas/autodiff.hpp"
#include "idcanvas/canvas.hpp"
#include "idcanvas/dit.hpp"
#include "idcanvas/image.hpp"
#include "idcanvas/oracle.hpp"
#include "idcanvas/scene.hpp"

namespace idcanvas {

// One training example on the linear path between data x0 and noise x1.
struct FlowBatch {
    Tensor x0;
    Tensor x1;
    double t = 0.0;
    Tensor x_t;     // (1 - t) x0 + t x1
    Tensor target;  // x1 - x0
    ad::Var prediction;
    ad::Var x0_hat;

    static FlowBatch make(Tensor x0, Tensor x1, double t);
};

Tensor interpolate(const Tensor& x0, const Tensor& x1, double t);

// Mean over entries of (mu - (x1 - x0))^2.
ad::Var cfm_loss(const ad::Var& prediction, const Tensor& target);
inline ad::Var cfm_loss(const FlowBatch& b) { return cfm_loss(b.prediction, b.target); }

// x_t - t * mu.
ad::Var one_step_estimate(const ad::Var& x_t, double t, const ad::Var& mu);

// Pure slice of an [H,W,C] image.
ad::Var crop_face(const ad::Var& image, const Box& box);

inline constexpr double kCosineEps = 1e-12;

// (1/n) sum_i (1 - cos(e_i, E(crop_i))).
ad::Var face_similarity_loss(std::span<const Tensor> reference_embeddings,
                             std::span<const ad::Var> crops, const OracleEmbedder& oracle);

ad::Var total_loss(const ad::Var& l_fm, const ad::Var& l_fs, double lambda);

struct CurriculumSchedule {
    std::vector<long> milestones;      // ascending steps where p changes
    std::vector<double> probabilities; // one more than milestones

    static CurriculumSchedule standard();  // [0,.05,.1,.2,.3,.4,.5] at 10k..60k
    // Same probabilities with milestones at k/7 of the run.
    static CurriculumSchedule compressed(long total_steps);
    static CurriculumSchedule fixed(double p);

    void validate() const;  // ConfigError
};

double curriculum_probability(long step, const CurriculumSchedule& schedule);

// Per-identity conditioning after replacement, degradation and dropout.
struct PreparedConditions {
    std::vector<IdentityCondition> identities;
    std::vector<Tensor> references;   // reference patch actually conditioned on
    std::vector<Tensor> embeddings;   // oracle embedding of that reference
    std::vector<bool> replaced;
    std::vector<bool> dropped;
};

struct ConditionOptions {
    double replace_probability = 0.0;
    double dropout = 0.15;
    bool degrade = true;             // canvas degradations on the pasted reference
    double degrade_probability = 0.5;
};

// Location canvas for one reference in model space (white = +1) together
// with its token-resolution mask.
IdentityCondition make_identity_condition(const FacePatch& reference,
                                          const Landmarks5& reference_landmarks,
                                          const Landmarks5& image_landmarks,
                                          const Tensor& embedding, const DiTConfig& config);

IdentityCondition dropped_condition(const DiTConfig& config);

// Each identity is independently replaced by a fresh same-identity render
// with probability p, and independently dropped with probability `dropout`.
PreparedConditions prepare_conditions(const SyntheticScene& scene, const ConditionOptions& options,
                                      Rng& rng, const OracleEmbedder& oracle,
                                      const DiTConfig& config, std::size_t reference_size);

// Model-space conversions.
Tensor to_model_space(const Tensor& image);    // 2x - 1
Tensor from_model_space(const Tensor& x);      // (x + 1) / 2, clamped

// v(x, t, conditional) returns the velocity; the unconditional branch is
// queried only when cfg_scale != 1.
using VelocityField = std::function<Tensor(const Tensor& x, double t, bool conditional)>;

// Integrates dx/dt = v from t = 1 down to t = 0 with uniform Euler steps.
Tensor euler_sample(const VelocityField& field, Tensor x1, std::size_t steps, double cfg_scale);

// Wraps a model and its conditions; the unconditional branch drops every
// identity.
VelocityField model_field(const DiTModel& model, const std::vector<int>& prompt,
                          const std::vector<IdentityCondition>& identities);

}  // namespace idcanvas
