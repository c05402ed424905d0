#include "idcanvas/gradcheck.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>

#include "idcanvas/errors.hpp"
#include "idcanvas/rng.hpp"

namespace idcanvas {

namespace {

std::optional<double> evaluate(const std::function<ad::Var()>& loss) {
    const double v = loss().item();
    if (!std::isfinite(v)) return std::nullopt;
    return v;
}

std::string scientific(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6e", v);
    return buf;
}

}  // namespace

GradCheckResult check_gradient(std::span<const ad::Var> inputs,
                               const std::function<ad::Var()>& loss, double step,
                               std::size_t max_coords_per_input) {
    require(step >= 1e-6 && step <= 1e-3, "check_gradient: step must lie in [1e-6, 1e-3]");
    GradCheckResult result;

    for (const auto& in : inputs) in.zero_grad();
    ad::Var root = loss();
    if (!std::isfinite(root.item())) {
        result.non_finite = true;
        result.max_rel_error = std::numeric_limits<double>::infinity();
        result.detail = "loss is non-finite at the base point";
        return result;
    }
    ad::backward(root);

    for (std::size_t k = 0; k < inputs.size(); ++k) {
        ad::Var in = inputs[k];
        Tensor analytic = in.grad().size() == in.value().size() ? in.grad()
                                                                 : Tensor::zeros_like(in.value());
        if (!analytic.all_finite()) {
            result.non_finite = true;
            result.max_rel_error = std::numeric_limits<double>::infinity();
            result.detail = "analytic gradient non-finite for input " + std::to_string(k);
            return result;
        }
        Tensor& x = in.mutable_value();
        const std::size_t n = x.size();
        std::size_t stride = 1;
        if (max_coords_per_input > 0 && n > max_coords_per_input)
            stride = (n + max_coords_per_input - 1) / max_coords_per_input;
        for (std::size_t i = 0; i < n; i += stride) {
            const double orig = x[i];
            x[i] = orig + step;
            auto fp = evaluate(loss);
            x[i] = orig - step;
            auto fm = evaluate(loss);
            x[i] = orig;
            if (!fp || !fm) {
                result.non_finite = true;
                result.max_rel_error = std::numeric_limits<double>::infinity();
                result.detail = "non-finite loss while perturbing input " + std::to_string(k) +
                                " coordinate " + std::to_string(i);
                return result;
            }
            const double numeric = (*fp - *fm) / (2.0 * step);
            const double rel = std::abs(analytic[i] - numeric) / (std::abs(numeric) + 1e-8);
            ++result.coordinates;
            if (rel > result.max_rel_error) {
                result.max_rel_error = rel;
                result.detail = "input " + std::to_string(k) + " coordinate " +
                                std::to_string(i) + ": analytic " + scientific(analytic[i]) +
                                " numeric " + scientific(numeric);
            }
        }
    }
    return result;
}

GradCheckResult check_gradient(const std::function<ad::Var(const ad::Var&)>& op,
                               const Tensor& point, double step, std::uint64_t seed) {
    ad::Var x = ad::variable(point);
    const Tensor probe = op(ad::constant(point)).value();
    Rng rng(seed);
    Tensor weights(probe.shape());
    for (double& w : weights.data()) w = normal(rng);
    ad::Var w = ad::constant(std::move(weights));
    auto loss = [&]() { return ad::sum(ad::mul(op(x), w)); };
    const ad::Var inputs[] = {x};
    return check_gradient(inputs, loss, step);
}

}  // namespace idcanvas
