#include "lgcn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace lgcn {

namespace {

// Marks the output differentiable and records it when a tape is active.
void track(std::string_view op, std::vector<Tensor> inputs, Tensor& out, Tape::BackwardFn fn) {
  const bool needs = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (!needs) return;
  out.set_requires_grad(true);
  if (Tape* tape = active_tape()) tape->record(op, std::move(inputs), out, std::move(fn));
}

void require_rank(const Tensor& t, std::size_t rank, std::string_view op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                         shape_str(t.shape()));
  }
}

// Plain i-p-j loops keep the per-element summation order of the textbook
// triple loop, so results are reproducible bit for bit.
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

// c[m x k] += a[m x n] * b[k x n]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * n;
      // four partial sums keep the reduction pipelined; order is still fixed
      double acc[4] = {0.0, 0.0, 0.0, 0.0};
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        acc[0] += arow[j] * brow[j];
        acc[1] += arow[j + 1] * brow[j + 1];
        acc[2] += arow[j + 2] * brow[j + 2];
        acc[3] += arow[j + 3] * brow[j + 3];
      }
      for (; j < n; ++j) acc[0] += arow[j] * brow[j];
      c[i * k + p] += (acc[0] + acc[1]) + (acc[2] + acc[3]);
    }
  }
}

// c[k x n] += a[m x k]^T * b[m x n]
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      if (aip == 0.0) continue;
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

bool is_broadcast_scalar(const Tensor& t) { return t.rank() == 0; }

Tensor binary(const Tensor& x, const Tensor& y, Elementwise kind, std::string_view name) {
  const bool xs = is_broadcast_scalar(x) && !is_broadcast_scalar(y);
  const bool ys = is_broadcast_scalar(y) && !is_broadcast_scalar(x);
  if (!xs && !ys && x.shape() != y.shape()) {
    throw DimensionError(std::string(name) + ": shape mismatch " + shape_str(x.shape()) + " vs " +
                         shape_str(y.shape()));
  }
  const Shape& shape = xs ? y.shape() : x.shape();
  const std::size_t n = shape_size(shape);
  auto xv = x.data();
  auto yv = y.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = xv[xs ? 0 : i];
    const double b = yv[ys ? 0 : i];
    switch (kind) {
      case Elementwise::kAdd: out[i] = a + b; break;
      case Elementwise::kSub: out[i] = a - b; break;
      default: out[i] = a * b; break;
    }
  }
  Tensor result(shape, std::move(out));
  track(name, {x, y}, result, [x, y, xs, ys, kind](const Tensor& o) {
    auto g = o.grad();
    Tensor xx = x;
    Tensor yy = y;
    if (xx.requires_grad()) {
      auto gx = xx.mutable_grad();
      auto yv = yy.data();
      for (std::size_t i = 0; i < g.size(); ++i) {
        double d = g[i];
        if (kind == Elementwise::kMul) d *= yv[ys ? 0 : i];
        gx[xs ? 0 : i] += d;
      }
    }
    if (yy.requires_grad()) {
      auto gy = yy.mutable_grad();
      auto xv = xx.data();
      for (std::size_t i = 0; i < g.size(); ++i) {
        double d = g[i];
        if (kind == Elementwise::kSub) d = -d;
        if (kind == Elementwise::kMul) d *= xv[xs ? 0 : i];
        gy[ys ? 0 : i] += d;
      }
    }
  });
  return result;
}

template <typename Forward, typename Derivative>
Tensor unary(const Tensor& x, std::string_view name, Forward forward, Derivative derivative) {
  auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = forward(xv[i]);
  Tensor result(x.shape(), std::move(out));
  track(name, {x}, result, [x, derivative](const Tensor& o) {
    Tensor xx = x;
    auto g = o.grad();
    auto yv = o.data();
    auto xv = xx.data();
    auto gx = xx.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * derivative(xv[i], yv[i]);
  });
  return result;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  gemm_nn(m, k, n, a.data().data(), b.data().data(), out.data());
  Tensor result({m, n}, std::move(out));
  track("matmul", {a, b}, result, [a, b, m, k, n](const Tensor& o) {
    Tensor aa = a;
    Tensor bb = b;
    const double* g = o.grad().data();
    if (aa.requires_grad()) gemm_nt(m, n, k, g, bb.data().data(), aa.mutable_grad().data());
    if (bb.requires_grad()) gemm_tn(m, k, n, aa.data().data(), g, bb.mutable_grad().data());
  });
  return result;
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  auto av = a.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  Tensor result({n, m}, std::move(out));
  track("transpose", {a}, result, [a, m, n](const Tensor& o) {
    Tensor aa = a;
    auto g = o.grad();
    auto ga = aa.mutable_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
  });
  return result;
}

Tensor elementwise(const Tensor& x, Elementwise kind, const Tensor& y) {
  switch (kind) {
    case Elementwise::kAdd:
    case Elementwise::kSub:
    case Elementwise::kMul:
      if (!y.defined()) throw ContractError("binary elementwise op needs a second operand");
      return binary(x, y, kind, kind == Elementwise::kAdd ? "add" : kind == Elementwise::kSub ? "sub" : "mul");
    case Elementwise::kRelu: return relu(x);
    case Elementwise::kElu: return elu(x);
    case Elementwise::kSigmoid: return sigmoid(x);
    case Elementwise::kTanh: return tanh(x);
  }
  throw ContractError("unknown elementwise kind");
}

Tensor add(const Tensor& x, const Tensor& y) { return binary(x, y, Elementwise::kAdd, "add"); }
Tensor sub(const Tensor& x, const Tensor& y) { return binary(x, y, Elementwise::kSub, "sub"); }
Tensor mul(const Tensor& x, const Tensor& y) { return binary(x, y, Elementwise::kMul, "mul"); }

Tensor relu(const Tensor& x) {
  return unary(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor elu(const Tensor& x) {
  return unary(
      x, "elu", [](double v) { return v > 0.0 ? v : std::expm1(v); },
      [](double v, double out) { return v > 0.0 ? 1.0 : out + 1.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, "sigmoid",
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double out) { return out * (1.0 - out); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, "tanh", [](double v) { return std::tanh(v); }, [](double, double out) { return 1.0 - out * out; });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      x, "scale", [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary(
      x, "add_scalar", [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_rank(x, 2, "add_bias");
  if (bias.rank() != 1 || bias.dim(0) != x.dim(1)) {
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " does not match " + shape_str(x.shape()));
  }
  const std::size_t m = x.dim(0), n = x.dim(1);
  auto xv = x.data();
  auto bv = bias.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] + bv[j];
  Tensor result({m, n}, std::move(out));
  track("add_bias", {x, bias}, result, [x, bias, m, n](const Tensor& o) {
    Tensor xx = x;
    Tensor bb = bias;
    auto g = o.grad();
    if (xx.requires_grad()) {
      auto gx = xx.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (bb.requires_grad()) {
      auto gb = bb.mutable_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
    }
  });
  return result;
}

Tensor softmax_rows(const Tensor& x) {
  if (x.rank() != 1 && x.rank() != 2) {
    throw DimensionError("softmax_rows: expected a vector or matrix, got " + shape_str(x.shape()));
  }
  const std::size_t n = x.cols();
  const std::size_t m = x.size() / n;
  auto xv = x.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = xv.data() + i * n;
    double* dst = out.data() + i * n;
    const double peak = *std::max_element(row, row + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      dst[j] = std::exp(row[j] - peak);
      total += dst[j];
    }
    for (std::size_t j = 0; j < n; ++j) dst[j] /= total;
  }
  Tensor result(x.shape(), std::move(out));
  track("softmax_rows", {x}, result, [x, m, n](const Tensor& o) {
    Tensor xx = x;
    auto g = o.grad();
    auto y = o.data();
    auto gx = xx.mutable_grad();
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * y[i * n + j];
      for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += y[i * n + j] * (g[i * n + j] - dot);
    }
  });
  return result;
}

Tensor concat_last(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_last: no parts");
  const Tensor& first = parts.front();
  if (first.rank() == 0) throw DimensionError("concat_last: scalar part");
  Shape lead(first.shape().begin(), first.shape().end() - 1);
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    Shape plead(p.shape().begin(), p.shape().end() - (p.rank() ? 1 : 0));
    if (p.rank() != first.rank() || plead != lead) {
      throw DimensionError("concat_last: leading dimensions differ: " + shape_str(first.shape()) + " vs " +
                           shape_str(p.shape()));
    }
    total += p.cols();
  }
  const std::size_t outer = shape_size(lead);
  std::vector<double> out(outer * total);
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const std::size_t w = p.cols();
    auto pv = p.data();
    for (std::size_t r = 0; r < outer; ++r) std::copy_n(pv.data() + r * w, w, out.data() + r * total + offset);
    offset += w;
  }
  Shape shape = lead;
  shape.push_back(total);
  Tensor result(shape, std::move(out));
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  track("concat_last", inputs, result, [inputs, outer, total](const Tensor& o) {
    auto g = o.grad();
    std::size_t offset = 0;
    for (Tensor p : inputs) {
      const std::size_t w = p.cols();
      if (p.requires_grad()) {
        auto gp = p.mutable_grad();
        for (std::size_t r = 0; r < outer; ++r)
          for (std::size_t j = 0; j < w; ++j) gp[r * w + j] += g[r * total + offset + j];
      }
      offset += w;
    }
  });
  return result;
}

Tensor concat_last(std::initializer_list<Tensor> parts) {
  return concat_last(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_rows: no parts");
  const Tensor& first = parts.front();
  if (first.rank() == 0) throw DimensionError("concat_rows: scalar part");
  Shape tail(first.shape().begin() + 1, first.shape().end());
  std::size_t rows = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != first.rank() || !std::equal(tail.begin(), tail.end(), p.shape().begin() + 1)) {
      throw DimensionError("concat_rows: trailing dimensions differ: " + shape_str(first.shape()) + " vs " +
                           shape_str(p.shape()));
    }
    rows += p.dim(0);
  }
  std::vector<double> out;
  out.reserve(rows * shape_size(tail));
  for (const Tensor& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  Shape shape{rows};
  shape.insert(shape.end(), tail.begin(), tail.end());
  Tensor result(shape, std::move(out));
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  track("concat_rows", inputs, result, [inputs](const Tensor& o) {
    auto g = o.grad();
    std::size_t offset = 0;
    for (Tensor p : inputs) {
      if (p.requires_grad()) {
        auto gp = p.mutable_grad();
        for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offset + i];
      }
      offset += p.size();
    }
  });
  return result;
}

Tensor slice_last(const Tensor& x, std::size_t begin, std::size_t length) {
  if (x.rank() == 0 || length == 0 || begin + length > x.cols()) {
    throw DimensionError("slice_last: [" + std::to_string(begin) + ", +" + std::to_string(length) +
                         ") out of range for " + shape_str(x.shape()));
  }
  const std::size_t w = x.cols();
  const std::size_t outer = x.size() / w;
  auto xv = x.data();
  std::vector<double> out(outer * length);
  for (std::size_t r = 0; r < outer; ++r) std::copy_n(xv.data() + r * w + begin, length, out.data() + r * length);
  Shape shape = x.shape();
  shape.back() = length;
  Tensor result(shape, std::move(out));
  track("slice_last", {x}, result, [x, begin, length, outer, w](const Tensor& o) {
    Tensor xx = x;
    auto g = o.grad();
    auto gx = xx.mutable_grad();
    for (std::size_t r = 0; r < outer; ++r)
      for (std::size_t j = 0; j < length; ++j) gx[r * w + begin + j] += g[r * length + j];
  });
  return result;
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t length) {
  if (x.rank() == 0 || length == 0 || begin + length > x.dim(0)) {
    throw DimensionError("slice_rows: [" + std::to_string(begin) + ", +" + std::to_string(length) +
                         ") out of range for " + shape_str(x.shape()));
  }
  const std::size_t row = x.size() / x.dim(0);
  auto xv = x.data();
  std::vector<double> out(xv.begin() + begin * row, xv.begin() + (begin + length) * row);
  Shape shape = x.shape();
  shape[0] = length;
  Tensor result(shape, std::move(out));
  track("slice_rows", {x}, result, [x, begin, row](const Tensor& o) {
    Tensor xx = x;
    auto g = o.grad();
    auto gx = xx.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[begin * row + i] += g[i];
  });
  return result;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " cannot become " + shape_str(shape));
  }
  Tensor result(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()));
  track("reshape", {x}, result, [x](const Tensor& o) {
    Tensor xx = x;
    auto g = o.grad();
    auto gx = xx.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
  return result;
}

Tensor gather_rows(const Tensor& x, std::span<const std::int64_t> index) {
  if (x.rank() == 0) throw DimensionError("gather_rows: scalar input");
  if (index.empty()) throw ContractError("gather_rows: empty index");
  const std::size_t rows = x.dim(0);
  const std::size_t row = x.size() / rows;
  for (std::int64_t id : index) {
    if (id < -1 || id >= static_cast<std::int64_t>(rows)) {
      throw DimensionError("gather_rows: index " + std::to_string(id) + " out of range for " + std::to_string(rows) +
                           " rows");
    }
  }
  auto xv = x.data();
  std::vector<double> out(index.size() * row, 0.0);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= 0) std::copy_n(xv.data() + index[i] * row, row, out.data() + i * row);
  }
  Shape shape = x.shape();
  shape[0] = index.size();
  Tensor result(shape, std::move(out));
  std::vector<std::int64_t> idx(index.begin(), index.end());
  track("gather_rows", {x}, result, [x, idx = std::move(idx), row](const Tensor& o) {
    Tensor xx = x;
    auto g = o.grad();
    auto gx = xx.mutable_grad();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] < 0) continue;
      for (std::size_t j = 0; j < row; ++j) gx[idx[i] * row + j] += g[i * row + j];
    }
  });
  return result;
}

Tensor reduce(const Tensor& x, Reduce kind, std::size_t axis) {
  if (axis >= x.rank()) {
    throw DimensionError("reduce: axis " + std::to_string(axis) + " invalid for shape " + shape_str(x.shape()));
  }
  const Shape& s = x.shape();
  const std::size_t extent = s[axis];
  const std::size_t outer = shape_size(Shape(s.begin(), s.begin() + axis));
  const std::size_t inner = shape_size(Shape(s.begin() + axis + 1, s.end()));
  auto xv = x.data();
  std::vector<double> out(outer * inner);
  std::vector<std::size_t> argmax;
  if (kind == Reduce::kMax) argmax.resize(out.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * extent * inner + i;
      if (kind == Reduce::kMax) {
        std::size_t best = 0;
        double value = xv[base];
        for (std::size_t e = 1; e < extent; ++e) {
          if (xv[base + e * inner] > value) {
            value = xv[base + e * inner];
            best = e;
          }
        }
        out[o * inner + i] = value;
        argmax[o * inner + i] = best;
      } else {
        double total = 0.0;
        for (std::size_t e = 0; e < extent; ++e) total += xv[base + e * inner];
        out[o * inner + i] = kind == Reduce::kMean ? total / static_cast<double>(extent) : total;
      }
    }
  }
  Shape shape = s;
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
  Tensor result(shape, std::move(out));
  const char* name = kind == Reduce::kMax ? "reduce_max" : kind == Reduce::kMean ? "reduce_mean" : "reduce_sum";
  track(name, {x}, result, [x, kind, extent, outer, inner, argmax = std::move(argmax)](const Tensor& o) {
    Tensor xx = x;
    auto g = o.grad();
    auto gx = xx.mutable_grad();
    const double w = kind == Reduce::kMean ? 1.0 / static_cast<double>(extent) : 1.0;
    for (std::size_t a = 0; a < outer; ++a) {
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t base = a * extent * inner + i;
        const double gi = g[a * inner + i];
        if (kind == Reduce::kMax) {
          gx[base + argmax[a * inner + i] * inner] += gi;
        } else {
          for (std::size_t e = 0; e < extent; ++e) gx[base + e * inner] += gi * w;
        }
      }
    }
  });
  return result;
}

Tensor sum_all(const Tensor& x) { return reduce(reshape(x, {x.size()}), Reduce::kSum, 0); }

Tensor cross_entropy(const Tensor& logits, std::size_t label) {
  const std::size_t n = logits.size();
  if (label >= n) {
    throw ContractError("cross_entropy: label " + std::to_string(label) + " out of range for " + std::to_string(n) +
                        " classes");
  }
  auto z = logits.data();
  const double peak = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double v : z) total += std::exp(v - peak);
  const double lse = peak + std::log(total);
  Tensor result = Tensor::scalar(lse - z[label]);
  track("cross_entropy", {logits}, result, [logits, label, lse](const Tensor& o) {
    Tensor l = logits;
    const double g = o.grad()[0];
    auto zv = l.data();
    auto gl = l.mutable_grad();
    for (std::size_t i = 0; i < zv.size(); ++i) {
      gl[i] += g * (std::exp(zv[i] - lse) - (i == label ? 1.0 : 0.0));
    }
  });
  return result;
}

}  // namespace lgcn
