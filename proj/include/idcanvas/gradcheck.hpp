#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "idcanvas/autodiff.hpp"

namespace idcanvas {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t coordinates = 0;
    bool non_finite = false;
    std::string detail;  // location of the worst coordinate, or the non-finite report
};

// Central-difference check of d(loss)/d(inputs). Every coordinate of every
// input is perturbed by +-step; the error per coordinate is
// |analytic - numeric| / (|numeric| + 1e-8). step must lie in [1e-6, 1e-3].
// max_coords_per_input > 0 checks an evenly strided subset instead.
GradCheckResult check_gradient(std::span<const ad::Var> inputs,
                               const std::function<ad::Var()>& loss, double step,
                               std::size_t max_coords_per_input = 0);

// Convenience form for a single op evaluated at `point`. Non-scalar outputs
// are reduced with fixed pseudo-random weights so every output coordinate
// contributes.
GradCheckResult check_gradient(const std::function<ad::Var(const ad::Var&)>& op,
                               const Tensor& point, double step, std::uint64_t seed = 7);

}  // namespace idcanvas
