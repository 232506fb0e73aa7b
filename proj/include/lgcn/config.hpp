#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "lgcn/fusion_heads.hpp"

namespace lgcn {

enum class Relation { kGcn, kFc, kLstm, kNone };

const char* relation_name(Relation relation);
Relation parse_relation(const std::string& name);

/// Every model and training knob. Serialized as key=value lines.
struct Config {
  // widths
  std::size_t d_o = 128;      // projected object appearance
  std::size_t d_s_loc = 64;   // spatial location encoding
  std::size_t d_p = 64;       // temporal location encoding
  std::size_t d_s = 128;      // shared visual/text subspace
  std::size_t hidden = 64;    // question Bi-LSTM, per direction
  std::size_t d_char = 64;    // character CNN kernels
  std::size_t d_c = 16;       // character embedding
  std::size_t word_dim = 300;
  std::size_t d_g = 128;      // global context width
  std::size_t attention_dim = 0;  // adjacency projections W1, W2; 0 means node_dim()
  std::size_t char_width = 5;
  std::size_t chars_per_word = 16;
  std::size_t max_words = 32;
  std::size_t global_width = 3;
  std::size_t gcn_layers = 2;  // P
  std::size_t objects = 5;     // K

  // optimization
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 0;  // 0 picks 64 for multiple-choice, 128 otherwise
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  double init_scale = 1.0;  // multiplies every uniform init bound

  TaskType task = TaskType::kMultipleChoice;

  // ablation switches
  bool use_objects = true;
  Relation relation = Relation::kGcn;
  bool use_spatial_loc = true;
  bool use_temporal_loc = true;
  bool shared_projection = false;
  bool normalize_boxes = true;
  bool shared_output_rnn = true;

  std::string embeddings;  // optional "token v1 ... vD" file

  /// Throws std::invalid_argument when an invariant fails.
  void validate() const;
  std::size_t node_dim() const { return d_o + d_s_loc + d_p; }
  std::size_t effective_batch() const;

  std::string to_string() const;
  static Config parse(const std::string& text);
  static Config load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  /// Applies one key=value assignment.
  void set(const std::string& key, const std::string& value);
  /// FNV-1a over the canonical serialization, as 16 hex digits.
  std::string hash() const;

  bool operator==(const Config&) const = default;
};

/// Desk-scale configuration used by the synthetic experiments.
Config small_config();

/// Two-frame, two-object configuration for end-to-end gradient checks.
Config tiny_config();

}  // namespace lgcn
