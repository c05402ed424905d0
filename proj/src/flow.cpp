#include "idcanvas/flow.hpp"

#include <algorithm>
#include <cmath>

#include "idcanvas/errors.hpp"
#include "idcanvas/log.hpp"
#include "idcanvas/tokenizer.hpp"

namespace idcanvas {

FlowBatch FlowBatch::make(Tensor x0, Tensor x1, double t) {
    require(x0.shape() == x1.shape(), "FlowBatch: x0 and x1 shapes differ");
    require(t >= 0.0 && t <= 1.0, "FlowBatch: t must lie in [0, 1]");
    FlowBatch b;
    b.x_t = interpolate(x0, x1, t);
    b.target = Tensor(x0.shape());
    for (std::size_t i = 0; i < x0.size(); ++i) b.target[i] = x1[i] - x0[i];
    b.x0 = std::move(x0);
    b.x1 = std::move(x1);
    b.t = t;
    return b;
}

Tensor interpolate(const Tensor& x0, const Tensor& x1, double t) {
    require(x0.shape() == x1.shape(), "interpolate: shape mismatch");
    Tensor out(x0.shape());
    for (std::size_t i = 0; i < x0.size(); ++i) out[i] = (1.0 - t) * x0[i] + t * x1[i];
    return out;
}

ad::Var cfm_loss(const ad::Var& prediction, const Tensor& target) {
    require(prediction.value().shape() == target.shape(), "cfm_loss: shape mismatch");
    return ad::mse(prediction, ad::constant(target));
}

ad::Var one_step_estimate(const ad::Var& x_t, double t, const ad::Var& mu) {
    require(t >= 0.0 && t <= 1.0, "one_step_estimate: t must lie in [0, 1]");
    return ad::sub(x_t, ad::scale(mu, t));
}

ad::Var crop_face(const ad::Var& image, const Box& box) {
    const Tensor& img = image.value();
    require(img.rank() == 3, "crop_face: image must be [H,W,C]");
    const std::size_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
    require(box.w > 0 && box.h > 0 && box.x0 + box.w <= w && box.y0 + box.h <= h,
            "crop_face: box outside the image");
    std::vector<std::size_t> index;
    index.reserve(box.w * box.h * c);
    for (std::size_t y = box.y0; y < box.y0 + box.h; ++y)
        for (std::size_t x = box.x0; x < box.x0 + box.w; ++x)
            for (std::size_t k = 0; k < c; ++k) index.push_back((y * w + x) * c + k);
    return ad::gather(image, std::move(index), {box.h, box.w, c});
}

ad::Var face_similarity_loss(std::span<const Tensor> reference_embeddings,
                             std::span<const ad::Var> crops, const OracleEmbedder& oracle) {
    require(!crops.empty(), "face_similarity_loss: needs at least one identity");
    require(crops.size() == reference_embeddings.size(),
            "face_similarity_loss: one reference embedding per crop");
    std::vector<ad::Var> terms;
    for (std::size_t i = 0; i < crops.size(); ++i) {
        const ad::Var e = oracle.embed(crops[i]);
        double ss = 0.0;
        for (double v : reference_embeddings[i].data()) ss += v * v;
        if (ss < kCosineEps) log_warn("face_similarity_loss: zero-norm reference embedding");
        terms.push_back(ad::reshape(ad::cosine(ad::constant(reference_embeddings[i]), e, kCosineEps), {1, 1}));
    }
    const ad::Var mean_cos = ad::mean(ad::concat_rows(terms));
    return ad::add_scalar(ad::scale(mean_cos, -1.0), 1.0);
}

ad::Var total_loss(const ad::Var& l_fm, const ad::Var& l_fs, double lambda) {
    require(lambda >= 0.0, "total_loss: lambda must be non-negative");
    if (lambda == 0.0) return l_fm;
    return ad::add(l_fm, ad::scale(l_fs, lambda));
}

CurriculumSchedule CurriculumSchedule::standard() {
    return {{10000, 20000, 30000, 40000, 50000, 60000}, {0.0, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5}};
}

CurriculumSchedule CurriculumSchedule::compressed(long total_steps) {
    require(total_steps >= 7, "CurriculumSchedule::compressed: need at least 7 steps");
    CurriculumSchedule s = standard();
    for (std::size_t k = 0; k < s.milestones.size(); ++k)
        s.milestones[k] = total_steps * static_cast<long>(k + 1) / 7;
    return s;
}

CurriculumSchedule CurriculumSchedule::fixed(double p) { return {{}, {p}}; }

void CurriculumSchedule::validate() const {
    if (probabilities.size() != milestones.size() + 1)
        throw ConfigError("curriculum: need exactly one more probability than milestones");
    for (std::size_t k = 0; k < probabilities.size(); ++k) {
        if (!(probabilities[k] >= 0.0 && probabilities[k] <= 1.0))
            throw ConfigError("curriculum: probabilities must lie in [0, 1]");
        if (k > 0 && probabilities[k] < probabilities[k - 1])
            throw ConfigError("curriculum: probabilities must be nondecreasing");
    }
    for (std::size_t k = 0; k < milestones.size(); ++k) {
        if (milestones[k] < 0) throw ConfigError("curriculum: negative milestone");
        if (k > 0 && milestones[k] <= milestones[k - 1])
            throw ConfigError("curriculum: milestones must be strictly increasing");
    }
}

double curriculum_probability(long step, const CurriculumSchedule& schedule) {
    require(step >= 0, "curriculum_probability: step must be non-negative");
    const auto it = std::upper_bound(schedule.milestones.begin(), schedule.milestones.end(), step);
    return schedule.probabilities[static_cast<std::size_t>(it - schedule.milestones.begin())];
}

Tensor to_model_space(const Tensor& image) {
    Tensor out = image;
    for (double& v : out.data()) v = 2.0 * v - 1.0;
    return out;
}

Tensor from_model_space(const Tensor& x) {
    Tensor out = x;
    for (double& v : out.data()) v = std::clamp(0.5 * (v + 1.0), 0.0, 1.0);
    return out;
}

IdentityCondition make_identity_condition(const FacePatch& reference,
                                          const Landmarks5& reference_landmarks,
                                          const Landmarks5& image_landmarks,
                                          const Tensor& embedding, const DiTConfig& config) {
    require(embedding.size() == config.embed_dim,
            "identity embedding length does not match the model");
    LocationCanvas canvas(config.image_size, config.image_size);
    canvas = place_face(std::move(canvas), reference, reference_landmarks, image_landmarks);
    IdentityCondition c;
    c.canvas = to_model_space(canvas.pixels());
    c.token_mask = downsample_mask(canvas.mask_bits(), config.image_size, config.image_size, config.patch);
    c.embedding = embedding.reshaped({config.embed_dim});
    return c;
}

IdentityCondition dropped_condition(const DiTConfig& config) {
    const std::size_t g = config.image_size / config.patch;
    IdentityCondition c;
    c.canvas = Tensor({config.image_size, config.image_size, config.channels});
    c.token_mask.assign(g * g, 0);
    c.embedding = Tensor({config.embed_dim});
    return c;
}

PreparedConditions prepare_conditions(const SyntheticScene& scene, const ConditionOptions& options,
                                      Rng& rng, const OracleEmbedder& oracle,
                                      const DiTConfig& config, std::size_t reference_size) {
    require(options.replace_probability >= 0.0 && options.replace_probability <= 1.0,
            "prepare_conditions: replacement probability outside [0, 1]");
    require(options.dropout >= 0.0 && options.dropout <= 1.0,
            "prepare_conditions: dropout outside [0, 1]");
    PreparedConditions out;
    for (const auto& id : scene.identities) {
        // All draws happen unconditionally so the stream does not depend on outcomes.
        const bool replace = bernoulli(rng, options.replace_probability);
        const bool drop = bernoulli(rng, options.dropout);
        Rng local(rng());
        Tensor reference = id.reference;
        if (replace) reference = render_identity(id.z, reference_size, Nuisance::sample(local), &local);
        const Tensor embedding = oracle.embed(reference);

        FacePatch patch = FacePatch::opaque(reference);
        if (options.degrade && bernoulli(local, options.degrade_probability)) {
            DegradationSpec spec = DegradationSpec::sample(local);
            spec.flip = false;
            patch = degrade_patch(patch, spec, local);
        }
        out.references.push_back(reference);
        out.embeddings.push_back(embedding);
        out.replaced.push_back(replace);
        out.dropped.push_back(drop);
        out.identities.push_back(drop ? dropped_condition(config)
                                      : make_identity_condition(patch, id.reference_landmarks,
                                                                id.image_landmarks, embedding, config));
    }
    return out;
}

Tensor euler_sample(const VelocityField& field, Tensor x, std::size_t steps, double cfg_scale) {
    require(steps >= 1, "euler_sample: steps must be at least 1");
    const double dt = 1.0 / static_cast<double>(steps);
    for (std::size_t k = 0; k < steps; ++k) {
        const double t = 1.0 - static_cast<double>(k) * dt;
        Tensor v = field(x, t, true);
        if (cfg_scale != 1.0) {
            const Tensor u = field(x, t, false);
            for (std::size_t i = 0; i < v.size(); ++i) v[i] = u[i] + cfg_scale * (v[i] - u[i]);
        }
        for (std::size_t i = 0; i < x.size(); ++i) x[i] -= dt * v[i];
    }
    return x;
}

VelocityField model_field(const DiTModel& model, const std::vector<int>& prompt,
                          const std::vector<IdentityCondition>& identities) {
    return [&model, prompt, identities](const Tensor& x, double t, bool conditional) {
        ModelInput in;
        in.x_t = x;
        in.t = t;
        in.prompt = prompt;
        if (conditional) in.identities = identities;
        return model.forward(in).value();
    };
}

}  // namespace idcanvas
