#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lgcn/tensor.hpp"

namespace lgcn {

enum class Elementwise { kAdd, kSub, kMul, kRelu, kElu, kSigmoid, kTanh };
enum class Reduce { kMean, kMax, kSum };

// Linear algebra.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Elementwise. Binary kinds need equal shapes; a rank-0 operand broadcasts.
Tensor elementwise(const Tensor& x, Elementwise kind, const Tensor& y = Tensor());
Tensor add(const Tensor& x, const Tensor& y);
Tensor sub(const Tensor& x, const Tensor& y);
Tensor mul(const Tensor& x, const Tensor& y);
Tensor relu(const Tensor& x);
/// ELU with alpha = 1.
Tensor elu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);
/// x[m x n] + bias[n] on every row.
Tensor add_bias(const Tensor& x, const Tensor& bias);

/// Row-wise softmax of a matrix, max-subtracted.
Tensor softmax_rows(const Tensor& x);

// Shape manipulation.
Tensor concat_last(std::span<const Tensor> parts);
Tensor concat_last(std::initializer_list<Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_last(const Tensor& x, std::size_t begin, std::size_t length);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t length);
Tensor reshape(const Tensor& x, Shape shape);
/// out[i] = x[index[i]] along axis 0; index -1 yields a zero row that
/// receives no gradient.
Tensor gather_rows(const Tensor& x, std::span<const std::int64_t> index);

Tensor reduce(const Tensor& x, Reduce kind, std::size_t axis);
Tensor sum_all(const Tensor& x);

/// -log softmax(logits)[label] for a vector of scores.
Tensor cross_entropy(const Tensor& logits, std::size_t label);

}  // namespace lgcn
