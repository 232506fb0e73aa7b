#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lgcn/model.hpp"

namespace lgcn {

/// Raised when a training loss becomes NaN or infinite.
class NonFiniteLossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunReport {
  std::vector<double> epoch_loss;  // mean training loss per epoch
  std::vector<double> eval_metric;  // validation accuracy or MSE per epoch
  std::vector<double> step_loss;    // mean batch loss per optimizer step
  double best_metric = 0.0;
  std::size_t best_epoch = 0;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  std::string config_hash;
  TaskType task = TaskType::kMultipleChoice;

  std::string to_json() const;
};

/// Accuracy for multiple-choice and open-ended packs, MSE of postprocessed
/// counts for counting packs.
struct Evaluation {
  double metric = 0.0;
  std::vector<double> predictions;
  bool higher_is_better = true;
};

Evaluation evaluate(const Model& model, const FeaturePack& pack);

struct TrainOptions {
  /// Stop after this many optimizer steps (0 = no limit).
  std::size_t max_steps = 0;
  /// Print one progress line per epoch to stderr.
  bool verbose = false;
  /// Keep the parameters of the best validation epoch.
  bool keep_best = true;
  /// Stop after the first epoch whose validation metric reaches this value
  /// (at least it for accuracy, at most it for MSE).
  std::optional<double> target_metric;
  std::function<void(std::size_t epoch, double loss, double metric)> on_epoch;
};

/// Minibatch training with seeded shuffling, mean loss per batch and Adam.
/// `model` ends up holding the best-validation parameters (or the last ones
/// without a validation pack).
RunReport train(Model& model, const FeaturePack& train_pack, const FeaturePack* val_pack,
                const TrainOptions& options = {});

/// Convenience: builds a model from the config and the training pack.
Model build_model(const Config& config, const FeaturePack& pack);

void save_report(const RunReport& report, const std::filesystem::path& path);

}  // namespace lgcn
