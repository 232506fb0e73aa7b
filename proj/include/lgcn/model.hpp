#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lgcn/config.hpp"
#include "lgcn/feature_pack.hpp"
#include "lgcn/location_graph.hpp"
#include "lgcn/question_encoder.hpp"

namespace lgcn {

/// Pack-dependent extents a model is built against.
struct ModelShape {
  std::size_t word_vocab = 0;
  std::size_t char_vocab = 0;
  std::size_t frame_dim = 0;
  std::size_t object_dim = 0;
  std::size_t answers = 0;  // options U (mc) or classes C (open); unused for count
  TaskType task = TaskType::kMultipleChoice;

  static ModelShape of(const FeaturePack& pack);
  bool operator==(const ModelShape&) const = default;
};

/// Every trainable module of the pipeline plus the registry that owns them.
struct Model {
  Config config;
  ModelShape shape;
  ParamStore params;

  QuestionEncoder question;
  Linear question_proj;  // 2h -> d_s, shared by question and answer options
  Linear object_proj;    // d_r -> d_o
  Mlp spatial;           // 4 -> d_s_loc
  GcnParams gcn;         // relation = gcn
  Mlp fc_relation;       // relation = fc
  LstmCell lstm_first;   // relation = lstm
  LstmCell lstm_second;
  Conv1d global_conv;  // d_f -> d_g
  Mlp fusion;          // [F^R, G] -> d_s
  Linear visual_proj;  // d_s -> d_s
  BiLstm out_rnn;
  std::vector<BiLstm> option_rnns;  // per option when the output Bi-LSTM is not shared
  Linear head;

  static Model create(const Config& config, const ModelShape& shape);
};

/// Intermediate results of one forward pass.
struct Forward {
  Tensor loss;
  Tensor scores;     // [1 x U], [1 x C] or [1 x 1]
  double prediction = 0.0;  // argmax index, or postprocessed count
  std::vector<Tensor> adjacency;
  Tensor visual;  // F^V after projection
};

/// Runs the whole pipeline for one QA item. Records on the active tape when
/// one is installed.
Forward forward(const Model& model, const FeaturePack& pack, std::size_t qa_index);

/// Same as `forward` on explicit inputs (used by tests and the bindings).
Forward forward(const Model& model, const Vocabulary& vocab, const VideoRecord& video, const QaItem& qa);

/// Relation-module output F^R for node features X^(0); fills `adjacency`
/// for the gcn relation.
Tensor relation_forward(const Model& model, const Tensor& x0, std::vector<Tensor>* adjacency = nullptr);

/// Location-aware node features X^(0) of a video, [N*K x d_v].
Tensor video_nodes(const Model& model, const VideoRecord& video);

/// Learned adjacency matrices A^(1) .. A^(P) of a video (gcn relation only).
std::vector<Tensor> video_adjacency(const Model& model, const VideoRecord& video);

/// Writes config.txt, shape.txt and the parameter files into `dir`.
void save_model(const Model& model, const std::filesystem::path& dir);
Model load_model(const std::filesystem::path& dir);

}  // namespace lgcn
