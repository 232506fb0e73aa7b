#include "lgcn/fusion_heads.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lgcn/ops.hpp"

namespace lgcn {

const char* task_name(TaskType task) {
  switch (task) {
    case TaskType::kMultipleChoice: return "mc";
    case TaskType::kOpenEnded: return "open";
    case TaskType::kCount: return "count";
  }
  return "?";
}

TaskType parse_task(const std::string& name) {
  if (name == "mc" || name == "multiple_choice") return TaskType::kMultipleChoice;
  if (name == "open" || name == "open_ended") return TaskType::kOpenEnded;
  if (name == "count") return TaskType::kCount;
  throw std::invalid_argument("unknown task type: " + name);
}

Tensor project_objects(const Tensor& raw, const Linear& proj) { return elu(linear_forward(proj, raw)); }

Tensor global_context(const Tensor& frame_features, const Conv1d& conv, std::size_t per_frame) {
  if (frame_features.rank() != 2 || frame_features.dim(0) == 0) {
    throw DimensionError("global_context: expected [N x d_f], got " + shape_str(frame_features.shape()));
  }
  Tensor merged = elu(conv1d_forward(conv, frame_features));
  std::vector<std::int64_t> index;
  index.reserve(frame_features.dim(0) * per_frame);
  for (std::size_t n = 0; n < frame_features.dim(0); ++n)
    for (std::size_t k = 0; k < per_frame; ++k) index.push_back(static_cast<std::int64_t>(n));
  return gather_rows(merged, index);
}

Tensor fuse_visual(const Tensor& regional, const Tensor& global, const Mlp& mlp) {
  if (regional.rank() != 2 || global.rank() != 2 || regional.dim(0) != global.dim(0)) {
    throw DimensionError("fuse_visual: misaligned rows " + shape_str(regional.shape()) + " and " +
                         shape_str(global.shape()));
  }
  return mlp_forward(mlp, concat_last({regional, global}));
}

Attention attend(const Tensor& visual, const Tensor& text, const std::vector<bool>& mask) {
  if (visual.rank() != 2 || text.rank() != 2 || visual.dim(1) != text.dim(1)) {
    throw DimensionError("attend: visual " + shape_str(visual.shape()) + " and text " + shape_str(text.shape()) +
                         " are not in a shared subspace");
  }
  if (mask.size() != text.dim(0)) throw DimensionError("attend: mask length does not match text rows");
  if (std::none_of(mask.begin(), mask.end(), [](bool m) { return m; })) {
    throw ContractError("attend: question has no unmasked words");
  }
  Tensor logits = matmul(visual, transpose(text));
  if (!std::all_of(mask.begin(), mask.end(), [](bool m) { return m; })) {
    const std::size_t rows = visual.dim(0), cols = text.dim(0);
    std::vector<double> bias(rows * cols, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j)
        if (!mask[j]) bias[i * cols + j] = kMaskedLogit;
    logits = add(logits, Tensor({rows, cols}, std::move(bias)));
  }
  Tensor weights = softmax_rows(logits);
  return Attention{weights, matmul(weights, text)};
}

Interaction vq_interact(const Tensor& visual, TextInput question, const BiLstm& out_rnn,
                        std::optional<TextInput> answer) {
  Interaction out;
  out.question = attend(visual, question.features, question.mask);
  Tensor cross;
  if (answer) {
    out.answer = attend(visual, answer->features, answer->mask);
    cross = concat_last({visual, out.question.attended, out.answer->attended, mul(visual, out.question.attended),
                         mul(visual, out.answer->attended)});
  } else {
    cross = concat_last({visual, out.question.attended, mul(visual, out.question.attended)});
  }
  Tensor sequence = bilstm_forward(out_rnn, cross, cross.dim(0));
  Tensor pooled = reduce(sequence, Reduce::kMax, 0);
  out.pooled = reshape(pooled, {1, pooled.dim(0)});
  return out;
}

Tensor mc_score(const std::vector<Tensor>& fused, const Linear& head) {
  if (fused.size() < 2) throw ContractError("mc_score: need at least two options");
  if (head.out_dim() != 1) throw DimensionError("mc_score: head must produce one score");
  Tensor stacked = concat_rows(fused);
  Tensor scores = linear_forward(head, stacked);
  return reshape(scores, {1, fused.size()});
}

Tensor mc_loss(const Tensor& scores, std::size_t correct) { return cross_entropy(scores, correct); }

Tensor open_ended_head(const Tensor& fused, const Linear& head) {
  if (head.out_dim() < 2) throw ContractError("open-ended head needs at least two classes");
  return linear_forward(head, fused);
}

Tensor open_ended_loss(const Tensor& scores, std::size_t label) { return cross_entropy(scores, label); }

Tensor count_head(const Tensor& fused, const Linear& head) {
  if (head.out_dim() != 1) throw DimensionError("count head must produce one value");
  return linear_forward(head, fused);
}

Tensor count_loss(const Tensor& prediction, int label) {
  if (label < 0 || label > kMaxCount) throw ContractError("count label " + std::to_string(label) + " outside 0..10");
  Tensor diff = add_scalar(reshape(prediction, {}), -static_cast<double>(label));
  return mul(diff, diff);
}

int count_postprocess(double raw) {
  if (!std::isfinite(raw)) return raw > 0 ? kMaxCount : 0;
  const double rounded = std::round(raw);
  return static_cast<int>(std::clamp(rounded, 0.0, static_cast<double>(kMaxCount)));
}

std::size_t argmax(const Tensor& scores) {
  auto v = scores.data();
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace lgcn
