#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lgcn/tensor.hpp"

namespace lgcn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  /// Per checked tensor, in the order given.
  std::vector<double> per_tensor;
  /// Tensor-scale error max|a - n| / max(1e-8, max|a| + max|n|). Coordinates
  /// whose gradient sits at the rounding floor of the difference quotient
  /// cannot dominate it.
  std::vector<double> per_tensor_normwise;
  double max_normwise_error = 0.0;
};

/// Compares reverse-mode gradients of a scalar function against central
/// differences (f(x+eps) - f(x-eps)) / 2 eps, coordinate by coordinate.
/// The relative error per coordinate is |a - n| / max(1e-8, |a| + |n|).
///
/// `f` is re-evaluated with each wrt tensor perturbed in place; it must be
/// deterministic. Existing gradients on the wrt tensors are overwritten.
GradCheckResult grad_check(const std::function<Tensor()>& f, std::vector<Tensor> wrt, double eps = 1e-5);

/// Single-input convenience form.
double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double eps = 1e-5);

}  // namespace lgcn
