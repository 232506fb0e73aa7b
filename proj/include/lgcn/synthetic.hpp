#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "lgcn/feature_pack.hpp"

namespace lgcn {

enum class SyntheticTask { kOrder, kAction, kCount };

const char* synthetic_task_name(SyntheticTask task);
SyntheticTask parse_synthetic_task(const std::string& name);

/// Raised when a template instance has no well-defined answer.
class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parameters of the synthetic temporal-reasoning generator.
///
/// Every video has `objects` tracks with distinct classes. An interaction
/// event of class pair (a, b) happens in a frame when the box centers of the
/// two objects are within `threshold` pixels.
struct SyntheticSpec {
  std::uint64_t seed = 0;
  std::size_t frames = 6;
  std::size_t objects = 5;
  std::size_t classes = 8;
  std::size_t feature_dim = 16;
  double noise = 0.1;
  double threshold = 24.0;
  SyntheticTask task = SyntheticTask::kOrder;
  std::size_t options = 5;
  double frame_width = 224.0;
  double frame_height = 224.0;
  std::size_t train_count = 2000;
  std::size_t val_count = 500;

  /// Throws std::invalid_argument for infeasible specs.
  void validate() const;
  /// key=value lines; unknown keys are an error.
  static SyntheticSpec load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

/// Class names used when rendering questions ("person", "dog", ...).
const std::vector<std::string>& synthetic_class_names();

/// Closed template vocabulary shared by every pack generated for `classes`.
Vocabulary synthetic_vocabulary(std::size_t classes);

/// Unit-norm class prototypes with pairwise distance above 4 * noise.
std::vector<std::vector<double>> class_prototypes(const SyntheticSpec& spec);

/// Generates `count` videos with one question each; fully determined by the
/// spec seed and `stream` (use distinct streams for train and validation).
FeaturePack generate_synthetic(const SyntheticSpec& spec, std::size_t count, std::uint64_t stream = 0);

/// Frames in which the event occurs, by exhaustive scan over object pairs.
std::vector<bool> event_frames(const LatentVideo& video, const EventPair& event);

/// Ground-truth label from the latent record alone.
std::int64_t oracle_answer(const LatentVideo& video, const LatentQuestion& question);

/// Canonical event ordering (first < second).
EventPair make_event(int a, int b);

/// All unordered class pairs in lexicographic order: the open-ended answer set.
std::vector<EventPair> all_events(std::size_t classes);

}  // namespace lgcn
