#include "lgcn/location_graph.hpp"

#include <cmath>

#include "lgcn/ops.hpp"

namespace lgcn {

std::vector<double> box_input(const BBox& box, bool normalize) {
  if (!normalize) return {box.x, box.y, box.w, box.h};
  if (box.frame_width <= 0.0 || box.frame_height <= 0.0) {
    throw ContractError("box normalization needs a positive frame extent");
  }
  return {box.x / box.frame_width, box.y / box.frame_height, box.w / box.frame_width, box.h / box.frame_height};
}

Tensor encode_spatial(std::span<const BBox> boxes, const Mlp& mlp, bool normalize) {
  std::vector<double> values;
  values.reserve(boxes.size() * 4);
  for (const BBox& box : boxes) {
    const auto row = box_input(box, normalize);
    values.insert(values.end(), row.begin(), row.end());
  }
  return mlp_forward(mlp, Tensor({boxes.size(), 4}, std::move(values)));
}

Tensor encode_spatial(const BBox& box, const Mlp& mlp, bool normalize) {
  Tensor row = encode_spatial(std::span<const BBox>(&box, 1), mlp, normalize);
  return reshape(row, {row.dim(1)});
}

Tensor encode_temporal(std::size_t frame, std::size_t dim) {
  return reshape(encode_temporal(std::span<const std::size_t>(&frame, 1), dim), {dim});
}

Tensor encode_temporal(std::span<const std::size_t> frames, std::size_t dim) {
  if (dim == 0 || dim % 2 != 0) throw ContractError("temporal encoding dimension must be even, got " + std::to_string(dim));
  std::vector<double> values(frames.size() * dim);
  for (std::size_t r = 0; r < frames.size(); ++r) {
    const double n = static_cast<double>(frames[r]);
    for (std::size_t j = 0; j < dim / 2; ++j) {
      const double angle = n / std::pow(10000.0, static_cast<double>(2 * j) / static_cast<double>(dim));
      values[r * dim + 2 * j] = std::sin(angle);
      values[r * dim + 2 * j + 1] = std::cos(angle);
    }
  }
  return Tensor({frames.size(), dim}, std::move(values));
}

std::vector<std::vector<ObjectRecord>> pad_frame_objects(std::vector<std::vector<ObjectRecord>> frames,
                                                         std::size_t per_frame, std::size_t feature_dim) {
  for (std::size_t n = 0; n < frames.size(); ++n) {
    auto& objects = frames[n];
    if (objects.size() > per_frame) {
      throw DimensionError("frame " + std::to_string(n) + " has " + std::to_string(objects.size()) +
                           " objects, more than K=" + std::to_string(per_frame));
    }
    const BBox reference = objects.empty() ? BBox{} : objects.front().box;
    while (objects.size() < per_frame) {
      ObjectRecord pad;
      pad.feature.assign(feature_dim, 0.0);
      pad.box = BBox{0.0, 0.0, 1.0, 1.0, reference.frame_width, reference.frame_height};
      pad.frame = n;
      objects.push_back(std::move(pad));
    }
  }
  return frames;
}

NodeFeatures build_node_features(const std::vector<std::vector<ObjectRecord>>& objects, const Tensor& projected,
                                 const Mlp& spatial_mlp, std::size_t temporal_dim, const LocationOptions& options) {
  if (objects.empty()) throw ContractError("build_node_features: no frames");
  const std::size_t per_frame = objects.front().size();
  std::vector<BBox> boxes;
  std::vector<std::size_t> frame_index;
  for (std::size_t n = 0; n < objects.size(); ++n) {
    if (objects[n].size() != per_frame) {
      throw DimensionError("ragged object counts: frame " + std::to_string(n) + " has " +
                           std::to_string(objects[n].size()) + ", expected " + std::to_string(per_frame));
    }
    for (const auto& obj : objects[n]) {
      boxes.push_back(obj.box);
      frame_index.push_back(obj.frame);
    }
  }
  const std::size_t total = boxes.size();
  if (projected.rank() != 2 || projected.dim(0) != total) {
    throw DimensionError("build_node_features: projected features " + shape_str(projected.shape()) + " for " +
                         std::to_string(total) + " objects");
  }
  const std::size_t spatial_dim = spatial_mlp.second.out_dim();
  Tensor spatial = options.use_spatial ? encode_spatial(boxes, spatial_mlp, options.normalize_boxes)
                                       : Tensor::zeros({total, spatial_dim});
  Tensor temporal = options.use_temporal ? encode_temporal(frame_index, temporal_dim)
                                         : Tensor::zeros({total, temporal_dim});
  return NodeFeatures{concat_last({projected, spatial, temporal}), objects.size(), per_frame};
}

GcnParams GcnParams::create(ParamStore& params, const std::string& name, std::size_t dim, std::size_t attention_dim,
                            std::size_t num_layers, Rng& rng, bool shared_projection) {
  if (num_layers == 0) throw ContractError("gcn needs at least one layer");
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  GcnParams gcn;
  for (std::size_t p = 0; p < num_layers; ++p) {
    const std::string prefix = name + ".layer" + std::to_string(p);
    Layer layer;
    layer.weight = params.add_uniform(prefix + ".weight", {dim, dim}, bound, rng);
    if (shared_projection && p > 0) {
      layer.query_proj = gcn.layers.front().query_proj;
      layer.key_proj = gcn.layers.front().key_proj;
    } else {
      layer.query_proj = params.add_uniform(prefix + ".w1", {dim, attention_dim}, bound, rng);
      layer.key_proj = params.add_uniform(prefix + ".w2", {dim, attention_dim}, bound, rng);
    }
    gcn.layers.push_back(std::move(layer));
  }
  return gcn;
}

Tensor compute_adjacency(const Tensor& x, const Tensor& query_proj, const Tensor& key_proj) {
  Tensor queries = matmul(x, query_proj);
  Tensor keys = matmul(x, key_proj);
  return softmax_rows(matmul(queries, transpose(keys)));
}

GcnOutput gcn_forward(const Tensor& x0, const GcnParams& params) {
  if (x0.rank() != 2 || x0.dim(1) != params.dim()) {
    throw DimensionError("gcn: node features " + shape_str(x0.shape()) + " do not match layer width " +
                         std::to_string(params.dim()));
  }
  GcnOutput out;
  Tensor x = x0;
  for (const auto& layer : params.layers) {
    Tensor adjacency = compute_adjacency(x, layer.query_proj, layer.key_proj);
    x = matmul(matmul(adjacency, x), layer.weight);
    out.adjacency.push_back(adjacency);
  }
  out.regional = add(x, x0);
  return out;
}

}  // namespace lgcn
