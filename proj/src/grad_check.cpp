#include "lgcn/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace lgcn {

GradCheckResult grad_check(const std::function<Tensor()>& f, std::vector<Tensor> wrt, double eps) {
  for (Tensor& t : wrt) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  Tape tape;
  {
    TapeScope scope(tape);
    Tensor out = f();
    if (out.size() != 1) throw ContractError("grad_check: function output is not scalar: " + shape_str(out.shape()));
    if (out.requires_grad()) tape.backward(out);
  }

  auto evaluate = [&f] {
    Tensor out = f();
    return out.item();
  };

  GradCheckResult result;
  for (Tensor& t : wrt) {
    std::vector<double> analytic(t.size(), 0.0);
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());
    double worst = 0.0, worst_abs = 0.0, a_max = 0.0, n_max = 0.0;
    auto values = t.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double up = evaluate();
      values[i] = saved - eps;
      const double down = evaluate();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double err = std::abs(analytic[i] - numeric) / std::max(1e-8, std::abs(analytic[i]) + std::abs(numeric));
      worst = std::max(worst, err);
      worst_abs = std::max(worst_abs, std::abs(analytic[i] - numeric));
      a_max = std::max(a_max, std::abs(analytic[i]));
      n_max = std::max(n_max, std::abs(numeric));
    }
    const double normwise = worst_abs / std::max(1e-8, a_max + n_max);
    result.per_tensor_normwise.push_back(normwise);
    result.max_normwise_error = std::max(result.max_normwise_error, normwise);
    result.per_tensor.push_back(worst);
    result.max_rel_error = std::max(result.max_rel_error, worst);
  }
  return result;
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double eps) {
  return grad_check([&] { return f(x); }, {x}, eps).max_rel_error;
}

}  // namespace lgcn
