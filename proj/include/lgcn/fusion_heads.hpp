#pragma once

#include <optional>
#include <vector>

#include "lgcn/layers.hpp"

namespace lgcn {

enum class TaskType { kMultipleChoice, kOpenEnded, kCount };

const char* task_name(TaskType task);
/// Accepts "mc", "open", "count" (and the long forms multiple_choice,
/// open_ended). Throws std::invalid_argument otherwise.
TaskType parse_task(const std::string& name);

/// Logit added to padded question columns before the attention softmax.
inline constexpr double kMaskedLogit = -1e9;

/// ELU(raw W + b) per object.
Tensor project_objects(const Tensor& raw, const Linear& proj);

/// ELU(conv1d(frames)) replicated `per_frame` times in frame-major order:
/// [N x d_f] -> [N*K x d_g].
Tensor global_context(const Tensor& frame_features, const Conv1d& conv, std::size_t per_frame);

/// F^V = MLP([F^R, G]).
Tensor fuse_visual(const Tensor& regional, const Tensor& global, const Mlp& mlp);

struct Attention {
  Tensor weights;   // S [T x kappa]
  Tensor attended;  // S F [T x d_s]
};

/// Row softmax of visual-text dot products with padded columns masked out.
Attention attend(const Tensor& visual, const Tensor& text, const std::vector<bool>& mask);

struct Interaction {
  Tensor pooled;  // [1 x d_out]
  Attention question;
  std::optional<Attention> answer;
};

struct TextInput {
  const Tensor& features;  // projected to d_s
  const std::vector<bool>& mask;
};

/// Builds F^C = [F^V | Q~ | F^V*Q~] (or the five-block form with an answer),
/// runs the output Bi-LSTM over T and max-pools over T.
Interaction vq_interact(const Tensor& visual, TextInput question, const BiLstm& out_rnn,
                        std::optional<TextInput> answer = std::nullopt);

/// Shared head over one pooled vector per option -> [1 x U] scores.
Tensor mc_score(const std::vector<Tensor>& fused, const Linear& head);
Tensor mc_loss(const Tensor& scores, std::size_t correct);

Tensor open_ended_head(const Tensor& fused, const Linear& head);
Tensor open_ended_loss(const Tensor& scores, std::size_t label);

inline constexpr int kMaxCount = 10;

/// Raw unbounded count prediction [1 x 1].
Tensor count_head(const Tensor& fused, const Linear& head);
/// (x - y)^2 for a label in 0..10.
Tensor count_loss(const Tensor& prediction, int label);
/// Round half away from zero, then clamp to 0..10.
int count_postprocess(double raw);

/// Index of the largest score, first on ties.
std::size_t argmax(const Tensor& scores);

}  // namespace lgcn
