#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lgcn/trainer.hpp"

namespace lgcn {

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  bool passed = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 1e-4;
  bool passed() const;
  /// Names of the failing checks, comma separated.
  std::string failures() const;
};

/// Hand-built pack with two frames of two objects and a three-word
/// question, for end-to-end gradient checks.
FeaturePack tiny_pack(TaskType task, std::uint64_t seed = 0);

/// Central-difference checks of every primitive op and layer.
GradCheckReport gradcheck_ops(std::uint64_t seed = 0, double tolerance = 1e-4);

/// Full-pipeline check through one head: one entry per parameter tensor.
GradCheckReport gradcheck_pipeline(const Config& config, TaskType task, double tolerance = 1e-4, double eps = 1e-5);

/// Ops, layers and all three heads on `config` (tiny_config() by default).
GradCheckReport gradcheck_cmd(const Config& config, double tolerance = 1e-4, double eps = 1e-5);

struct AdjacencyDump {
  Tensor matrix;  // [T x T]
  std::filesystem::path csv;
  std::filesystem::path pgm;
};

/// Writes A^(layer) (1-based) of the video as `<prefix>.csv` and
/// `<prefix>.pgm` (binary greyscale, [0,1] mapped linearly to [0,255]).
AdjacencyDump dump_adjacency(const Model& model, const FeaturePack& pack, const std::string& video_id,
                             std::size_t layer, const std::filesystem::path& prefix);

/// Table-4 ablation variants: baseline, of, gcn, full, fc, lstm, loc_t,
/// loc_s. Each is a modification of the base configuration.
Config apply_variant(const Config& base, const std::string& variant);
/// Row label in the comparison table ("baseline+OF+GCNs+Loc", ...).
std::string variant_label(const std::string& variant);
const std::vector<std::string>& variant_names();

struct AblationRow {
  std::string variant;
  std::string label;
  double metric = 0.0;
  RunReport report;
};

/// Trains each variant with the same seed and data (model selection on
/// `val_pack` when given) and evaluates it on `test_pack`.
std::vector<AblationRow> ablate(const Config& base, const std::vector<std::string>& variants,
                                const FeaturePack& train_pack, const FeaturePack* val_pack,
                                const FeaturePack& test_pack, const TrainOptions& options = {});

std::string format_ablation(const std::vector<AblationRow>& rows, TaskType task);

}  // namespace lgcn
