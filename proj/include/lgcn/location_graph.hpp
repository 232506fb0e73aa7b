#pragma once

#include <span>
#include <string>
#include <vector>

#include "lgcn/layers.hpp"

namespace lgcn {

/// Top-left corner and extent in pixels, plus the frame size used for
/// normalization.
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 1.0;
  double h = 1.0;
  double frame_width = 1.0;
  double frame_height = 1.0;
};

/// One detection: raw appearance feature, box and frame index.
struct ObjectRecord {
  std::vector<double> feature;
  BBox box;
  std::size_t frame = 0;
};

/// (x / W, y / H, w / W, h / H), or the raw pixel values when `normalize`
/// is false.
std::vector<double> box_input(const BBox& box, bool normalize = true);

/// Spatial location feature d^s = MLP(box) for a batch of boxes: [n x out].
Tensor encode_spatial(std::span<const BBox> boxes, const Mlp& mlp, bool normalize = true);
/// Single-box form returning a vector of length out.
Tensor encode_spatial(const BBox& box, const Mlp& mlp, bool normalize = true);

/// Fixed sinusoid: entry 2j = sin(n / 10000^(2j/d)), entry 2j+1 = cos(same).
Tensor encode_temporal(std::size_t frame, std::size_t dim);
/// One row per frame index: [frames.size() x dim].
Tensor encode_temporal(std::span<const std::size_t> frames, std::size_t dim);

/// Node matrix in frame-major order: row t is object (t / K, t % K).
struct NodeFeatures {
  Tensor x;  // [T x (d_o + d_s + d_p)]
  std::size_t frames = 0;
  std::size_t per_frame = 0;
};

struct LocationOptions {
  bool use_spatial = true;
  bool use_temporal = true;
  bool normalize_boxes = true;
};

/// Pads each frame to exactly K objects with zero-feature objects whose box
/// is (0, 0, 1, 1) pixels. Frames with more than K objects are an error.
std::vector<std::vector<ObjectRecord>> pad_frame_objects(std::vector<std::vector<ObjectRecord>> frames,
                                                         std::size_t per_frame, std::size_t feature_dim);

/// Concatenates [o ; d^s ; d^t] per object. `projected` holds the projected
/// appearance features in the same frame-major order. Disabled location
/// parts are replaced by zeros so the width stays fixed.
NodeFeatures build_node_features(const std::vector<std::vector<ObjectRecord>>& objects, const Tensor& projected,
                                 const Mlp& spatial_mlp, std::size_t temporal_dim,
                                 const LocationOptions& options = {});

struct GcnParams {
  struct Layer {
    Tensor weight;      // W^(p)     [d_v x d_v]
    Tensor query_proj;  // W_1^(p)   [d_v x d_a]
    Tensor key_proj;    // W_2^(p)   [d_v x d_a]
  };
  std::vector<Layer> layers;

  /// With `shared_projection`, every layer reuses the first layer's W_1/W_2.
  static GcnParams create(ParamStore& params, const std::string& name, std::size_t dim, std::size_t attention_dim,
                          std::size_t num_layers, Rng& rng, bool shared_projection = false);
  std::size_t dim() const { return layers.front().weight.dim(0); }
};

/// A = softmax_rows((X W_1)(X W_2)^T).
Tensor compute_adjacency(const Tensor& x, const Tensor& query_proj, const Tensor& key_proj);

struct GcnOutput {
  Tensor regional;                 // F^R = X^(P) + X^(0)
  std::vector<Tensor> adjacency;  // A^(1) .. A^(P)
};

/// X^(p) = A^(p) X^(p-1) W^(p) with A^(p) rebuilt from X^(p-1); no
/// nonlinearity between layers.
GcnOutput gcn_forward(const Tensor& x0, const GcnParams& params);

}  // namespace lgcn
