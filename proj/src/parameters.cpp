#include "idcanvas/parameters.hpp"

#include <cmath>

#include "idcanvas/errors.hpp"

namespace idcanvas {

Parameter& ParameterStore::add(const std::string& name, Tensor init, bool trainable) {
    require(!contains(name), "duplicate parameter name '" + name + "'");
    index_.emplace(name, params_.size());
    params_.push_back(Parameter{name, ad::variable(std::move(init)), trainable});
    return params_.back();
}

Parameter& ParameterStore::get(const std::string& name) {
    auto it = index_.find(name);
    require(it != index_.end(), "unknown parameter '" + name + "'");
    return params_[it->second];
}

const Parameter& ParameterStore::get(const std::string& name) const {
    auto it = index_.find(name);
    require(it != index_.end(), "unknown parameter '" + name + "'");
    return params_[it->second];
}

std::size_t ParameterStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value().size();
    return n;
}

void ParameterStore::zero_grad() {
    for (auto& p : params_) p.var.zero_grad();
}

Linear Linear::create(ParameterStore& store, const std::string& name, std::size_t in,
                      std::size_t out, Rng& rng, double gain) {
    Tensor w({in, out});
    const double sd = gain / std::sqrt(static_cast<double>(in));
    if (gain != 0.0)
        for (double& v : w.data()) v = normal(rng, 0.0, sd);
    Linear l;
    l.weight = store.add(name + ".weight", std::move(w)).var;
    l.bias = store.add(name + ".bias", Tensor({out})).var;
    return l;
}

}  // namespace idcanvas
