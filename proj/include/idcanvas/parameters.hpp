#pragma once

#include <deque>
#include <string>
#include <unordered_map>

#include "idcanvas/autodiff.hpp"
#include "idcanvas/rng.hpp"

namespace idcanvas {

struct Parameter {
    std::string name;
    ad::Var var;
    bool trainable = true;

    Tensor& value() { return var.mutable_value(); }
    const Tensor& value() const { return var.value(); }
    const Tensor& grad() const { return var.grad(); }
};

// Owns every named parameter of a model. Insertion order is the canonical
// order for checkpoints and optimizer state.
class ParameterStore {
   public:
    Parameter& add(const std::string& name, Tensor init, bool trainable = true);
    Parameter& get(const std::string& name);
    const Parameter& get(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    std::deque<Parameter>& all() { return params_; }
    const std::deque<Parameter>& all() const { return params_; }
    std::size_t count() const { return params_.size(); }
    std::size_t scalar_count() const;

    void zero_grad();

   private:
    std::deque<Parameter> params_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Dense affine layer x W + b with W stored as [in, out].
struct Linear {
    ad::Var weight;
    ad::Var bias;

    ad::Var operator()(const ad::Var& x) const { return ad::linear(x, weight, bias); }

    // Normal(0, gain / sqrt(in)) weights and zero bias; gain 0 gives an
    // all-zero layer.
    static Linear create(ParameterStore& store, const std::string& name, std::size_t in,
                         std::size_t out, Rng& rng, double gain = 1.0);
};

}  // namespace idcanvas
