#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "lgcn/fusion_heads.hpp"
#include "lgcn/location_graph.hpp"
#include "lgcn/vocab.hpp"

namespace lgcn {

/// Base for every FeaturePack parse failure.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
/// tensors.bin ended before a record was complete.
class TruncatedBlobError : public FormatError {
 public:
  using FormatError::FormatError;
};
/// A record's extents disagree with the manifest.
class ExtentError : public FormatError {
 public:
  using FormatError::FormatError;
};
class UnknownTaskError : public FormatError {
 public:
  using FormatError::FormatError;
};

struct VideoRecord {
  std::string id;
  std::size_t frames = 0;
  std::vector<double> frame_features;   // frames x d_f
  std::vector<double> object_features;  // frames x K x d_r
  std::vector<double> boxes;            // frames x K x 4 (x, y, w, h in pixels)
  double frame_width = 1.0;
  double frame_height = 1.0;

  bool operator==(const VideoRecord&) const = default;
};

struct QaItem {
  std::string video_id;
  TaskType task = TaskType::kMultipleChoice;
  std::vector<std::int64_t> question;
  std::vector<std::vector<std::int64_t>> options;  // multiple-choice only
  std::int64_t label = 0;

  bool operator==(const QaItem&) const = default;
};

/// Event = unordered pair of object classes, stored with first < second.
struct EventPair {
  int first = 0;
  int second = 0;
  bool operator==(const EventPair&) const = default;
};

enum class QuestionKind { kBefore, kAfter, kCount, kWhat };

/// Noise-free generative record of a synthetic video.
struct LatentVideo {
  std::string video_id;
  std::size_t frames = 0;
  std::size_t objects = 0;
  double threshold = 0.0;
  std::vector<int> classes;                  // class per object slot
  std::vector<std::array<double, 4>> boxes;  // frames x objects, pixels
  bool operator==(const LatentVideo&) const = default;
};

/// The template instance a synthetic question was rendered from.
struct LatentQuestion {
  std::size_t qa_index = 0;
  QuestionKind kind = QuestionKind::kWhat;
  EventPair event;                  // referenced event (before/after/count)
  std::vector<EventPair> options;   // multiple-choice options in order
  std::vector<EventPair> classes;   // open-ended answer set
  bool operator==(const LatentQuestion&) const = default;
};

struct FeaturePack {
  std::string dataset = "unnamed";
  std::size_t frames = 0;  // maximum N over videos
  std::size_t objects_per_frame = 0;
  std::size_t frame_dim = 0;
  std::size_t object_dim = 0;
  TaskType task = TaskType::kMultipleChoice;
  std::size_t answer_count = 0;  // U for multiple-choice, C for open-ended, 11 for count
  Vocabulary vocab;
  std::vector<VideoRecord> videos;
  std::vector<QaItem> qa;
  std::vector<LatentVideo> latent_videos;
  std::vector<LatentQuestion> latent_questions;

  bool operator==(const FeaturePack&) const = default;

  const VideoRecord& video(const std::string& id) const;
  std::size_t video_index(const std::string& id) const;
};

/// Throws FormatError subclasses when invariants fail.
void validate_pack(const FeaturePack& pack);

/// Directory layout: manifest.txt, tensors.bin, qa.txt, vocab.txt and,
/// for synthetic packs, latent.txt.
void write_pack(const FeaturePack& pack, const std::filesystem::path& dir);
FeaturePack read_pack(const std::filesystem::path& dir);

/// Objects of one video frame by frame, ready for build_node_features.
std::vector<std::vector<ObjectRecord>> video_objects(const FeaturePack& pack, const VideoRecord& video);

struct Batch {
  std::size_t size = 0;
  std::size_t frames = 0;  // batch-max N
  std::size_t words = 0;   // batch-max question length
  std::vector<std::string> video_ids;
  std::vector<std::array<double, 2>> frame_sizes;
  Tensor frame_features;   // [B x N x d_f]
  Tensor object_features;  // [B x N x K x d_r]
  Tensor boxes;            // [B x N x K x 4]
  std::vector<std::vector<bool>> frame_mask;
  std::vector<std::vector<std::int64_t>> questions;  // padded with 0
  std::vector<std::vector<bool>> question_mask;
};

/// Pads videos to the batch-max frame count (zero frames, mask false) and
/// questions to the batch-max length.
Batch pad_batch(const FeaturePack& pack, const std::vector<std::size_t>& qa_indices);

/// Recovers the valid region of sample `i`: the video record (frames,
/// objects, boxes) and the unpadded question.
std::pair<VideoRecord, std::vector<std::int64_t>> unbatch(const Batch& batch, std::size_t i);

}  // namespace lgcn
