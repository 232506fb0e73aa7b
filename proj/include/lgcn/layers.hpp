#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lgcn/params.hpp"
#include "lgcn/rng.hpp"
#include "lgcn/tensor.hpp"

namespace lgcn {

enum class Activation { kRelu, kElu };

/// y = x W + b, weight [in x out], bias [out].
struct Linear {
  Tensor weight;
  Tensor bias;

  static Linear create(ParamStore& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng);
  std::size_t in_dim() const { return weight.dim(0); }
  std::size_t out_dim() const { return weight.dim(1); }
};

Tensor linear_forward(const Linear& layer, const Tensor& x);

/// Two linear layers with an activation between them.
struct Mlp {
  Linear first;
  Linear second;
  Activation activation = Activation::kRelu;

  static Mlp create(ParamStore& params, const std::string& name, std::size_t in, std::size_t hidden,
                    std::size_t out, Activation activation, Rng& rng);
};

Tensor mlp_forward(const Mlp& mlp, const Tensor& x);

/// Two highway layers: y = g * relu(x Wt + bt) + (1 - g) * x,
/// g = sigmoid(x Wg + bg).
struct Highway {
  struct Layer {
    Linear transform;
    Linear gate;
  };
  std::vector<Layer> layers;

  static Highway create(ParamStore& params, const std::string& name, std::size_t dim, Rng& rng,
                        std::size_t num_layers = 2);
  std::size_t dim() const { return layers.front().transform.in_dim(); }
};

Tensor highway_forward(const Highway& hw, const Tensor& x);

/// Row table; id 0 is padding and id 1 is the unknown token.
struct EmbeddingTable {
  static constexpr std::int64_t kPad = 0;
  static constexpr std::int64_t kUnk = 1;

  Tensor rows;

  static EmbeddingTable create(ParamStore& params, const std::string& name, std::size_t vocab, std::size_t dim,
                               Rng& rng);
  std::size_t vocab() const { return rows.dim(0); }
  std::size_t dim() const { return rows.dim(1); }
};

/// Gathers rows for `ids` and returns [ids.size() x dim]. Padding ids give
/// zero rows and never receive gradient.
Tensor embedding_lookup(const EmbeddingTable& table, std::span<const std::int64_t> ids);

/// Temporal convolution with "same" padding. Kernel is stored as
/// [width x in x out] so the unfolded input multiplies it directly.
struct Conv1d {
  Tensor kernel;
  Tensor bias;

  static Conv1d create(ParamStore& params, const std::string& name, std::size_t in, std::size_t out,
                       std::size_t width, Rng& rng);
  std::size_t width() const { return kernel.dim(0); }
  std::size_t in_dim() const { return kernel.dim(1); }
  std::size_t out_dim() const { return kernel.dim(2); }
};

Tensor conv1d_forward(const Conv1d& conv, const Tensor& seq);

/// Single-channel 2-D convolution whose kernel spans the full embedding
/// width, stored as [height x width x out].
struct Conv2d {
  Tensor kernel;
  Tensor bias;

  static Conv2d create(ParamStore& params, const std::string& name, std::size_t height, std::size_t width,
                       std::size_t out, Rng& rng);
  std::size_t height() const { return kernel.dim(0); }
  std::size_t width() const { return kernel.dim(1); }
  std::size_t out_dim() const { return kernel.dim(2); }
};

/// Character CNN over [words x chars x d_c]: valid convolution along the
/// character axis, ReLU, then max over positions. Returns [words x out].
Tensor char_cnn(const Conv2d& conv, const Tensor& char_emb);

/// Gate layout in the 4h columns: input, forget, candidate, output.
struct LstmCell {
  Tensor w_input;   // [in x 4h]
  Tensor w_hidden;  // [h x 4h]
  Tensor bias;      // [4h]

  static LstmCell create(ParamStore& params, const std::string& name, std::size_t in, std::size_t hidden, Rng& rng);
  std::size_t in_dim() const { return w_input.dim(0); }
  std::size_t hidden() const { return w_hidden.dim(0); }
};

/// Runs one direction over seq[0, length) and returns [length x h] in input
/// order (a reversed run still stores row i for input step i).
Tensor lstm_sequence(const LstmCell& cell, const Tensor& seq, std::size_t length, bool reverse);

struct BiLstm {
  LstmCell forward;
  LstmCell backward;

  static BiLstm create(ParamStore& params, const std::string& name, std::size_t in, std::size_t hidden, Rng& rng);
  std::size_t hidden() const { return forward.hidden(); }
  std::size_t out_dim() const { return 2 * hidden(); }
};

/// Returns [L x 2h]; rows at or past `length` are exact zeros.
Tensor bilstm_forward(const BiLstm& rnn, const Tensor& seq, std::size_t length);

}  // namespace lgcn
