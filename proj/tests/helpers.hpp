#pragma once

#include <cmath>
#include <vector>

#include "lgcn/rng.hpp"
#include "lgcn/tensor.hpp"

namespace testing {

inline lgcn::Tensor random_tensor(lgcn::Shape shape, lgcn::Rng& rng, double lo = -1.0, double hi = 1.0,
                                  bool requires_grad = true) {
  std::vector<double> v(lgcn::shape_size(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return lgcn::Tensor(std::move(shape), std::move(v), requires_grad);
}

inline lgcn::Tensor fill_uniform(lgcn::Tensor t, lgcn::Rng& rng, double bound) {
  for (double& x : t.mutable_data()) x = rng.uniform(-bound, bound);
  return t;
}

inline void set_values(lgcn::Tensor t, const std::vector<double>& values) {
  auto d = t.mutable_data();
  for (std::size_t i = 0; i < values.size(); ++i) d[i] = values[i];
}

inline void set_all(lgcn::Tensor t, double value) {
  for (double& x : t.mutable_data()) x = value;
}

// Plain row-major triple loop.
inline std::vector<double> naive_matmul(const std::vector<double>& a, const std::vector<double>& b, std::size_t m,
                                        std::size_t k, std::size_t n) {
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) c[i * n + j] += a[i * k + p] * b[p * n + j];
  return c;
}

inline std::vector<double> to_vec(const lgcn::Tensor& t) { return {t.data().begin(), t.data().end()}; }

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return a.size() == b.size() ? m : INFINITY;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double elu(double x) { return x > 0 ? x : std::exp(x) - 1.0; }

}  // namespace testing
