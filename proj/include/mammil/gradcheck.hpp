#pragma once

#include <functional>
#include <span>

#include "mammil/tensor.hpp"

namespace mammil {

using ScalarFn = std::function<Tensor(Tape&, const Tensor&)>;

/// Compares reverse-mode gradients of `f` at `x` with central differences.
///
/// Returns max over entries of |analytic - numeric| / max(1, |numeric|).
/// Throws ValidationError if f does not produce a single value or h <= 0.
double finite_diff_check(const ScalarFn& f, const Tensor& x, double h = 1e-5);

/// Same check for a loss closed over a set of parameter tensors. Each
/// parameter is perturbed in place and restored afterwards; existing
/// gradients on the parameters are overwritten.
double finite_diff_check_params(const std::function<Tensor(Tape&)>& loss, std::span<Tensor> params,
                                double h = 1e-5);

}  // namespace mammil
