#include "idcanvas/optim.hpp"

#include <cmath>

#include "idcanvas/errors.hpp"

namespace idcanvas {

AdamW::AdamW(ParameterStore& store, AdamWConfig config) : store_(store), config_(config) {
    require(config.lr > 0.0, "AdamW: learning rate must be positive");
    require(config.beta1 >= 0.0 && config.beta1 < 1.0 && config.beta2 >= 0.0 && config.beta2 < 1.0,
            "AdamW: betas must lie in [0, 1)");
    require(config.weight_decay >= 0.0, "AdamW: weight decay must be non-negative");
    for (const auto& p : store_.all()) {
        m_.push_back(Tensor::zeros_like(p.value()));
        v_.push_back(Tensor::zeros_like(p.value()));
    }
}

void AdamW::step() {
    require(m_.size() == store_.count(), "AdamW: parameter store changed after construction");
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    std::size_t k = 0;
    for (auto& p : store_.all()) {
        Tensor& m = m_[k];
        Tensor& v = v_[k];
        ++k;
        if (!p.trainable) continue;
        Tensor& w = p.value();
        const Tensor& g = p.grad();
        const bool has_grad = g.size() == w.size();
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double gi = has_grad ? g[i] : 0.0;
            m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * gi;
            v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * gi * gi;
            w[i] -= config_.lr * config_.weight_decay * w[i];
            w[i] -= config_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
        }
    }
}

double gradient_norm(const ParameterStore& store) {
    double ss = 0.0;
    for (const auto& p : store.all())
        if (p.grad().size() == p.value().size())
            for (double g : p.grad().data()) ss += g * g;
    return std::sqrt(ss);
}

}  // namespace idcanvas
