#include "lgcn/layers.hpp"

#include <cmath>

#include "lgcn/ops.hpp"

namespace lgcn {

Linear Linear::create(ParamStore& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Linear layer;
  layer.weight = params.add_uniform(name + ".weight", {in, out}, bound, rng);
  layer.bias = params.add(name + ".bias", {out});
  return layer;
}

Tensor linear_forward(const Linear& layer, const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) != layer.in_dim()) {
    throw DimensionError("linear: input " + shape_str(x.shape()) + " does not match weight " +
                         shape_str(layer.weight.shape()));
  }
  return add_bias(matmul(x, layer.weight), layer.bias);
}

Mlp Mlp::create(ParamStore& params, const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
                Activation activation, Rng& rng) {
  if (hidden == 0) throw ContractError("mlp hidden dimension must be positive");
  return Mlp{Linear::create(params, name + ".fc1", in, hidden, rng), Linear::create(params, name + ".fc2", hidden, out, rng),
             activation};
}

Tensor mlp_forward(const Mlp& mlp, const Tensor& x) {
  Tensor h = linear_forward(mlp.first, x);
  h = mlp.activation == Activation::kRelu ? relu(h) : elu(h);
  return linear_forward(mlp.second, h);
}

Highway Highway::create(ParamStore& params, const std::string& name, std::size_t dim, Rng& rng,
                        std::size_t num_layers) {
  Highway hw;
  for (std::size_t i = 0; i < num_layers; ++i) {
    const std::string prefix = name + ".layer" + std::to_string(i);
    Layer layer{Linear::create(params, prefix + ".transform", dim, dim, rng),
                Linear::create(params, prefix + ".gate", dim, dim, rng)};
    hw.layers.push_back(std::move(layer));
  }
  return hw;
}

Tensor highway_forward(const Highway& hw, const Tensor& x) {
  Tensor y = x;
  for (const auto& layer : hw.layers) {
    Tensor transformed = relu(linear_forward(layer.transform, y));
    Tensor gate = sigmoid(linear_forward(layer.gate, y));
    Tensor carry = add_scalar(scale(gate, -1.0), 1.0);
    y = add(mul(gate, transformed), mul(carry, y));
  }
  return y;
}

EmbeddingTable EmbeddingTable::create(ParamStore& params, const std::string& name, std::size_t vocab,
                                      std::size_t dim, Rng& rng) {
  if (vocab < 2) throw ContractError("embedding table needs room for pad and unk rows");
  EmbeddingTable table;
  table.rows = params.add_uniform(name, {vocab, dim}, 1.0 / std::sqrt(static_cast<double>(dim)), rng);
  auto values = table.rows.mutable_data();
  for (std::size_t j = 0; j < dim; ++j) values[j] = 0.0;
  return table;
}

Tensor embedding_lookup(const EmbeddingTable& table, std::span<const std::int64_t> ids) {
  std::vector<std::int64_t> index(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= static_cast<std::int64_t>(table.vocab())) {
      throw DimensionError("embedding id " + std::to_string(ids[i]) + " out of range for vocabulary of " +
                           std::to_string(table.vocab()));
    }
    index[i] = ids[i] == EmbeddingTable::kPad ? -1 : ids[i];
  }
  return gather_rows(table.rows, index);
}

Conv1d Conv1d::create(ParamStore& params, const std::string& name, std::size_t in, std::size_t out,
                      std::size_t width, Rng& rng) {
  if (width % 2 == 0) throw ContractError("conv1d width must be odd for same padding");
  const double bound = 1.0 / std::sqrt(static_cast<double>(in * width));
  return Conv1d{params.add_uniform(name + ".kernel", {width, in, out}, bound, rng), params.add(name + ".bias", {out})};
}

Tensor conv1d_forward(const Conv1d& conv, const Tensor& seq) {
  if (seq.rank() != 2 || seq.dim(1) != conv.in_dim()) {
    throw DimensionError("conv1d: input " + shape_str(seq.shape()) + " does not match kernel " +
                         shape_str(conv.kernel.shape()));
  }
  const std::size_t length = seq.dim(0);
  const auto half = static_cast<std::int64_t>(conv.width() / 2);
  std::vector<Tensor> taps;
  for (std::int64_t offset = -half; offset <= half; ++offset) {
    std::vector<std::int64_t> index(length);
    for (std::size_t t = 0; t < length; ++t) {
      const std::int64_t src = static_cast<std::int64_t>(t) + offset;
      index[t] = (src < 0 || src >= static_cast<std::int64_t>(length)) ? -1 : src;
    }
    taps.push_back(gather_rows(seq, index));
  }
  Tensor unfolded = concat_last(taps);
  Tensor weight = reshape(conv.kernel, {conv.width() * conv.in_dim(), conv.out_dim()});
  return add_bias(matmul(unfolded, weight), conv.bias);
}

Conv2d Conv2d::create(ParamStore& params, const std::string& name, std::size_t height, std::size_t width,
                      std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(height * width));
  return Conv2d{params.add_uniform(name + ".kernel", {height, width, out}, bound, rng),
                params.add(name + ".bias", {out})};
}

Tensor char_cnn(const Conv2d& conv, const Tensor& char_emb) {
  if (char_emb.rank() != 3 || char_emb.dim(2) != conv.width()) {
    throw DimensionError("char_cnn: input " + shape_str(char_emb.shape()) + " does not match kernel " +
                         shape_str(conv.kernel.shape()));
  }
  const std::size_t words = char_emb.dim(0);
  const std::size_t chars = char_emb.dim(1);
  if (chars < conv.height()) {
    throw DimensionError("char_cnn: word length " + std::to_string(chars) + " shorter than kernel height " +
                         std::to_string(conv.height()));
  }
  const std::size_t positions = chars - conv.height() + 1;
  Tensor flat = reshape(char_emb, {words * chars, conv.width()});
  std::vector<Tensor> taps;
  for (std::size_t offset = 0; offset < conv.height(); ++offset) {
    std::vector<std::int64_t> index;
    index.reserve(words * positions);
    for (std::size_t w = 0; w < words; ++w)
      for (std::size_t p = 0; p < positions; ++p) index.push_back(static_cast<std::int64_t>(w * chars + p + offset));
    taps.push_back(gather_rows(flat, index));
  }
  Tensor weight = reshape(conv.kernel, {conv.height() * conv.width(), conv.out_dim()});
  Tensor response = relu(add_bias(matmul(concat_last(taps), weight), conv.bias));
  return reduce(reshape(response, {words, positions, conv.out_dim()}), Reduce::kMax, 1);
}

LstmCell LstmCell::create(ParamStore& params, const std::string& name, std::size_t in, std::size_t hidden,
                          Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  LstmCell cell;
  cell.w_input = params.add_uniform(name + ".w_input", {in, 4 * hidden}, bound, rng);
  cell.w_hidden = params.add_uniform(name + ".w_hidden", {hidden, 4 * hidden}, bound, rng);
  cell.bias = params.add(name + ".bias", {4 * hidden});
  auto b = cell.bias.mutable_data();
  for (std::size_t j = hidden; j < 2 * hidden; ++j) b[j] = 1.0;
  return cell;
}

Tensor lstm_sequence(const LstmCell& cell, const Tensor& seq, std::size_t length, bool reverse) {
  if (seq.rank() != 2 || seq.dim(1) != cell.in_dim()) {
    throw DimensionError("lstm: input " + shape_str(seq.shape()) + " does not match input weight " +
                         shape_str(cell.w_input.shape()));
  }
  if (length == 0 || length > seq.dim(0)) {
    throw ContractError("lstm: length " + std::to_string(length) + " invalid for sequence of " +
                        std::to_string(seq.dim(0)));
  }
  const std::size_t h = cell.hidden();
  Tensor valid = length == seq.dim(0) ? seq : slice_rows(seq, 0, length);
  Tensor projected = add_bias(matmul(valid, cell.w_input), cell.bias);
  std::vector<Tensor> states(length);
  Tensor hidden;
  Tensor memory;
  for (std::size_t step = 0; step < length; ++step) {
    const std::size_t t = reverse ? length - 1 - step : step;
    Tensor gates = slice_rows(projected, t, 1);
    if (hidden.defined()) gates = add(gates, matmul(hidden, cell.w_hidden));
    Tensor in_gate = sigmoid(slice_last(gates, 0, h));
    Tensor forget_gate = sigmoid(slice_last(gates, h, h));
    Tensor candidate = tanh(slice_last(gates, 2 * h, h));
    Tensor out_gate = sigmoid(slice_last(gates, 3 * h, h));
    memory = memory.defined() ? add(mul(forget_gate, memory), mul(in_gate, candidate)) : mul(in_gate, candidate);
    hidden = mul(out_gate, tanh(memory));
    states[t] = hidden;
  }
  return concat_rows(states);
}

BiLstm BiLstm::create(ParamStore& params, const std::string& name, std::size_t in, std::size_t hidden, Rng& rng) {
  return BiLstm{LstmCell::create(params, name + ".fwd", in, hidden, rng),
                LstmCell::create(params, name + ".bwd", in, hidden, rng)};
}

Tensor bilstm_forward(const BiLstm& rnn, const Tensor& seq, std::size_t length) {
  if (seq.rank() != 2) throw DimensionError("bilstm: expected [L x d], got " + shape_str(seq.shape()));
  if (length > seq.dim(0)) {
    throw ContractError("bilstm: length " + std::to_string(length) + " exceeds sequence length " +
                        std::to_string(seq.dim(0)));
  }
  if (length == 0) return Tensor::zeros({seq.dim(0), rnn.out_dim()});
  Tensor both = concat_last({lstm_sequence(rnn.forward, seq, length, false),
                             lstm_sequence(rnn.backward, seq, length, true)});
  if (length == seq.dim(0)) return both;
  Tensor padding = Tensor::zeros({seq.dim(0) - length, rnn.out_dim()});
  return concat_rows(std::vector<Tensor>{both, padding});
}

}  // namespace lgcn
