#pragma once

#include <vector>

#include "idcanvas/parameters.hpp"

namespace idcanvas {

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.95;
    double eps = 1e-8;
    double weight_decay = 1e-3;
};

// Decoupled weight decay Adam over every trainable parameter of a store.
class AdamW {
   public:
    AdamW(ParameterStore& store, AdamWConfig config = {});

    void step();
    long steps_taken() const { return t_; }
    const AdamWConfig& config() const { return config_; }

    // Moments in store order, for checkpointing.
    std::vector<Tensor>& first_moments() { return m_; }
    std::vector<Tensor>& second_moments() { return v_; }
    const std::vector<Tensor>& first_moments() const { return m_; }
    const std::vector<Tensor>& second_moments() const { return v_; }
    void set_steps_taken(long t) { t_ = t; }

   private:
    ParameterStore& store_;
    AdamWConfig config_;
    std::vector<Tensor> m_, v_;
    long t_ = 0;
};

// Global L2 norm of all gradients currently held by the store.
double gradient_norm(const ParameterStore& store);

}  // namespace idcanvas
