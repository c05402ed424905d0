#pragma once

#include <cstdint>
#include <vector>

#include "idcanvas/optim.hpp"
#include "idcanvas/parameters.hpp"

namespace idcanvas {

// Rectified flow on points in the plane: data x0 from a two-component
// Gaussian mixture, noise x1 ~ N(0, I).
struct ToyFlowConfig {
    std::size_t width = 32;
    std::size_t steps = 5000;
    std::size_t batch = 256;
    std::size_t sample_steps = 100;
    double mode_offset = 1.5;  // components at (+-offset, 0)
    double mode_sd = 0.4;
    AdamWConfig optimizer{.lr = 3e-3, .beta1 = 0.9, .beta2 = 0.99, .eps = 1e-8, .weight_decay = 0.0};
};

// Rows of [n, 2].
Tensor sample_mixture(const ToyFlowConfig& config, std::size_t n, Rng& rng);

// Velocity MLP (x, y, t) -> 2 with two GELU hidden layers.
class ToyVelocityMlp {
   public:
    ToyVelocityMlp(std::size_t width, std::uint64_t seed);
    ad::Var forward(const ad::Var& points, const Tensor& t) const;
    Tensor velocity(const Tensor& points, double t) const;
    ParameterStore& params() { return params_; }

   private:
    ParameterStore params_;
    Linear l1_, l2_, l3_;
};

struct ToyFlowResult {
    double final_loss = 0.0;
    double energy_distance = 0.0;
    Tensor generated;
};

// Trains from seed, then samples n points and compares them with n fresh
// mixture draws.
ToyFlowResult run_toy_flow(const ToyFlowConfig& config, std::uint64_t seed, std::size_t n = 4096);

// 2 E|X-Y| - E|X-X'| - E|Y-Y'| with unbiased within-sample means.
double energy_distance(const Tensor& a, const Tensor& b);

}  // namespace idcanvas
