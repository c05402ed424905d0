#include "idcanvas/toy_flow.hpp"

#include <cmath>

#include "idcanvas/errors.hpp"
#include "idcanvas/flow.hpp"

namespace idcanvas {

Tensor sample_mixture(const ToyFlowConfig& config, std::size_t n, Rng& rng) {
    Tensor out({n, 2});
    for (std::size_t i = 0; i < n; ++i) {
        const double cx = bernoulli(rng, 0.5) ? config.mode_offset : -config.mode_offset;
        out[2 * i] = normal(rng, cx, config.mode_sd);
        out[2 * i + 1] = normal(rng, 0.0, config.mode_sd);
    }
    return out;
}

ToyVelocityMlp::ToyVelocityMlp(std::size_t width, std::uint64_t seed) {
    Rng rng(seed);
    l1_ = Linear::create(params_, "toy.l1", 3, width, rng);
    l2_ = Linear::create(params_, "toy.l2", width, width, rng);
    l3_ = Linear::create(params_, "toy.l3", width, 2, rng);
}

ad::Var ToyVelocityMlp::forward(const ad::Var& points, const Tensor& t) const {
    const ad::Var parts[] = {points, ad::constant(t)};
    const ad::Var h = ad::gelu(l1_(ad::concat_cols(parts)));
    return l3_(ad::gelu(l2_(h)));
}

Tensor ToyVelocityMlp::velocity(const Tensor& points, double t) const {
    return forward(ad::constant(points), Tensor({points.dim(0), 1}, t)).value();
}

ToyFlowResult run_toy_flow(const ToyFlowConfig& config, std::uint64_t seed, std::size_t n) {
    require(config.steps > 0 && config.batch > 0 && config.sample_steps > 0,
            "run_toy_flow: steps, batch and sample_steps must be positive");
    ToyVelocityMlp mlp(config.width, derive_seed(seed, 1));
    AdamW opt(mlp.params(), config.optimizer);
    Rng rng(derive_seed(seed, 2));
    ToyFlowResult result;
    const std::size_t b = config.batch;
    for (std::size_t step = 0; step < config.steps; ++step) {
        const Tensor x0 = sample_mixture(config, b, rng);
        Tensor x1({b, 2}), xt({b, 2}), t({b, 1}), target({b, 2});
        for (std::size_t i = 0; i < b; ++i) {
            t[i] = uniform(rng);
            for (std::size_t k = 0; k < 2; ++k) {
                x1[2 * i + k] = normal(rng);
                xt[2 * i + k] = (1.0 - t[i]) * x0[2 * i + k] + t[i] * x1[2 * i + k];
                target[2 * i + k] = x1[2 * i + k] - x0[2 * i + k];
            }
        }
        mlp.params().zero_grad();
        ad::Var loss = ad::mse(mlp.forward(ad::constant(xt), t), ad::constant(target));
        ad::backward(loss);
        opt.step();
        result.final_loss = loss.item();
    }

    Rng eval_rng(derive_seed(seed, 3));
    Tensor noise({n, 2});
    for (double& v : noise.data()) v = normal(eval_rng);
    VelocityField field = [&mlp](const Tensor& x, double t, bool) { return mlp.velocity(x, t); };
    result.generated = euler_sample(field, noise, config.sample_steps, 1.0);
    result.energy_distance = energy_distance(result.generated, sample_mixture(config, n, eval_rng));
    return result;
}

double energy_distance(const Tensor& a, const Tensor& b) {
    require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(1),
            "energy_distance: expected [n, d] point sets of equal dimension");
    require(a.dim(0) > 1 && b.dim(0) > 1, "energy_distance: need at least two points per set");
    const std::size_t d = a.dim(1);
    auto dist = [d](const Tensor& p, std::size_t i, const Tensor& q, std::size_t j) {
        double ss = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            const double diff = p[i * d + k] - q[j * d + k];
            ss += diff * diff;
        }
        return std::sqrt(ss);
    };
    auto within = [&](const Tensor& p) {
        const std::size_t n = p.dim(0);
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) s += dist(p, i, p, j);
        return 2.0 * s / static_cast<double>(n * (n - 1));
    };
    double cross = 0.0;
    for (std::size_t i = 0; i < a.dim(0); ++i)
        for (std::size_t j = 0; j < b.dim(0); ++j) cross += dist(a, i, b, j);
    cross /= static_cast<double>(a.dim(0) * b.dim(0));
    return 2.0 * cross - within(a) - within(b);
}

}  // namespace idcanvas
