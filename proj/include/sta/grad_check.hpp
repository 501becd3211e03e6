#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "sta/autodiff.hpp"
#include "sta/tensor.hpp"

namespace sta {

struct GradCheckResult {
    /// max over coordinates of |analytic - numeric| / max(1, |analytic|, |numeric|)
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    /// Coordinates excluded as non-differentiable points.
    std::size_t skipped = 0;
};

/// Builds a scalar from x inside the given graph.
using ScalarFn = std::function<ad::Var(ad::Graph&, ad::Var)>;
/// Returns true for a coordinate sitting at (or within tolerance of) a kink.
using KinkFn = std::function<bool(std::size_t index, double value)>;

/// Central-difference check of d f / d x at x.
GradCheckResult grad_check(const ScalarFn& f, const Tensor& x, double eps, const KinkFn& skip = {});

/// Central differences over every entry of several tensors, perturbed in place.
/// `value` re-evaluates the scalar with the current tensor contents; each entry
/// is restored bit-exactly after use.
GradCheckResult compare_finite_differences(std::span<Tensor* const> params, std::span<const Tensor> analytic,
                                           const std::function<double()>& value, double eps);

/// Skip rule for relu-style kinks at 0: |x| < 1e-7.
bool near_zero_kink(std::size_t index, double value);

}  // namespace sta
