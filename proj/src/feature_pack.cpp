#include "lgcn/feature_pack.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "lgcn/binary_io.hpp"

namespace lgcn {

namespace {

constexpr const char* kFormatTag = "lgcn-featurepack-1";

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) throw FormatError(where + ": bad number '" + s + "'");
  return v;
}

std::size_t parse_size(const std::string& s, const std::string& where) {
  std::size_t v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) throw FormatError(where + ": bad integer '" + s + "'");
  return v;
}

std::vector<std::int64_t> parse_ids(const std::string& field, const std::string& where) {
  std::vector<std::int64_t> ids;
  std::istringstream in(field);
  std::string tok;
  while (in >> tok) ids.push_back(static_cast<std::int64_t>(parse_size(tok, where)));
  return ids;
}

std::string join_ids(const std::vector<std::int64_t>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(ids[i]);
  }
  return out;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  return parts;
}

const char* kind_name(QuestionKind kind) {
  switch (kind) {
    case QuestionKind::kBefore: return "before";
    case QuestionKind::kAfter: return "after";
    case QuestionKind::kCount: return "count";
    case QuestionKind::kWhat: return "what";
  }
  return "?";
}

QuestionKind parse_kind(const std::string& s) {
  if (s == "before") return QuestionKind::kBefore;
  if (s == "after") return QuestionKind::kAfter;
  if (s == "count") return QuestionKind::kCount;
  if (s == "what") return QuestionKind::kWhat;
  throw FormatError("latent.txt: unknown question kind '" + s + "'");
}

TaskType parse_task_field(const std::string& s) {
  try {
    return parse_task(s);
  } catch (const std::invalid_argument&) {
    throw UnknownTaskError("unknown task type '" + s + "'");
  }
}

std::string pair_str(const EventPair& e) { return std::to_string(e.first) + "-" + std::to_string(e.second); }

EventPair parse_pair(const std::string& s) {
  const auto parts = split(s, '-');
  if (parts.size() != 2) throw FormatError("latent.txt: bad event pair '" + s + "'");
  return EventPair{static_cast<int>(parse_size(parts[0], "latent.txt")),
                   static_cast<int>(parse_size(parts[1], "latent.txt"))};
}

void write_record(std::ostream& out, const Shape& extents, const std::vector<double>& values) {
  binary::write_u64(out, extents.size());
  for (std::size_t e : extents) binary::write_u64(out, e);
  binary::write_f64s(out, values);
}

Shape read_header(std::istream& in, const std::string& where) {
  std::uint64_t rank = 0;
  if (!binary::read_u64(in, rank)) throw TruncatedBlobError("tensors.bin truncated at " + where);
  if (rank > 8) throw FormatError("tensors.bin: implausible rank " + std::to_string(rank) + " at " + where);
  Shape extents(rank);
  for (auto& e : extents) {
    std::uint64_t v = 0;
    if (!binary::read_u64(in, v)) throw TruncatedBlobError("tensors.bin truncated at " + where);
    e = v;
  }
  return extents;
}

std::vector<double> read_values(std::istream& in, std::size_t count, const std::string& where) {
  std::vector<double> values(count);
  for (auto& v : values) {
    if (!binary::read_f64(in, v)) throw TruncatedBlobError("tensors.bin truncated in record " + where);
  }
  return values;
}

void expect_extents(const Shape& got, const Shape& want, const std::string& where) {
  if (got != want) {
    throw ExtentError("record " + where + " has extents " + shape_str(got) + ", manifest implies " + shape_str(want));
  }
}

}  // namespace

const VideoRecord& FeaturePack::video(const std::string& id) const { return videos[video_index(id)]; }

std::size_t FeaturePack::video_index(const std::string& id) const {
  for (std::size_t i = 0; i < videos.size(); ++i) {
    if (videos[i].id == id) return i;
  }
  throw std::out_of_range("unknown video id: " + id);
}

void validate_pack(const FeaturePack& pack) {
  const std::size_t k = pack.objects_per_frame;
  std::map<std::string, std::size_t> ids;
  for (const auto& v : pack.videos) {
    const std::string where = "video " + v.id;
    if (!ids.emplace(v.id, 0).second) throw FormatError("duplicate " + where);
    if (v.frames == 0 || v.frames > pack.frames) {
      throw ExtentError(where + " has " + std::to_string(v.frames) + " frames, manifest allows 1.." +
                        std::to_string(pack.frames));
    }
    if (v.frame_features.size() != v.frames * pack.frame_dim) throw ExtentError(where + ": frame feature extent");
    if (v.object_features.size() != v.frames * k * pack.object_dim) throw ExtentError(where + ": object feature extent");
    if (v.boxes.size() != v.frames * k * 4) throw ExtentError(where + ": box extent");
  }
  for (std::size_t i = 0; i < pack.qa.size(); ++i) {
    const auto& q = pack.qa[i];
    const std::string where = "qa " + std::to_string(i);
    if (!ids.count(q.video_id)) throw FormatError(where + " references unknown video " + q.video_id);
    if (q.task != pack.task) throw UnknownTaskError(where + " task does not match manifest");
    if (q.question.empty()) throw FormatError(where + " has an empty question");
    auto check_ids = [&](const std::vector<std::int64_t>& tokens) {
      for (auto id : tokens) {
        if (id < 0 || id >= static_cast<std::int64_t>(pack.vocab.size())) {
          throw FormatError(where + " token id " + std::to_string(id) + " outside vocabulary");
        }
      }
    };
    check_ids(q.question);
    for (const auto& opt : q.options) check_ids(opt);
    switch (q.task) {
      case TaskType::kMultipleChoice:
        if (q.options.size() != pack.answer_count || q.options.size() < 2) {
          throw ExtentError(where + " has " + std::to_string(q.options.size()) + " options, manifest declares " +
                            std::to_string(pack.answer_count));
        }
        if (q.label < 0 || q.label >= static_cast<std::int64_t>(q.options.size())) {
          throw FormatError(where + " label out of range");
        }
        break;
      case TaskType::kOpenEnded:
        if (q.label < 0 || q.label >= static_cast<std::int64_t>(pack.answer_count)) {
          throw FormatError(where + " label out of range");
        }
        break;
      case TaskType::kCount:
        if (q.label < 0 || q.label > kMaxCount) throw FormatError(where + " count label outside 0..10");
        break;
    }
  }
}

void write_pack(const FeaturePack& pack, const std::filesystem::path& dir) {
  validate_pack(pack);
  std::filesystem::create_directories(dir);
  {
    std::ofstream m(dir / "manifest.txt");
    m << "format=" << kFormatTag << '\n'
      << "dataset=" << pack.dataset << '\n'
      << "task=" << task_name(pack.task) << '\n'
      << "frames=" << pack.frames << '\n'
      << "objects=" << pack.objects_per_frame << '\n'
      << "frame_dim=" << pack.frame_dim << '\n'
      << "object_dim=" << pack.object_dim << '\n'
      << "answers=" << pack.answer_count << '\n'
      << "videos=" << pack.videos.size() << '\n'
      << "questions=" << pack.qa.size() << '\n';
    for (const auto& v : pack.videos) m << "video=" << v.id << '\n';
    if (!m) throw std::runtime_error("cannot write manifest in " + dir.string());
  }
  {
    std::ofstream bin(dir / "tensors.bin", std::ios::binary);
    const std::size_t k = pack.objects_per_frame;
    for (const auto& v : pack.videos) {
      write_record(bin, {2}, {v.frame_width, v.frame_height});
      write_record(bin, {v.frames, pack.frame_dim}, v.frame_features);
      write_record(bin, {v.frames, k, pack.object_dim}, v.object_features);
      write_record(bin, {v.frames, k, 4}, v.boxes);
    }
    if (!bin) throw std::runtime_error("cannot write tensors.bin in " + dir.string());
  }
  {
    std::ofstream q(dir / "qa.txt");
    for (const auto& item : pack.qa) {
      q << item.video_id << '\t' << task_name(item.task) << '\t' << join_ids(item.question) << '\t' << item.label
        << '\t';
      for (std::size_t i = 0; i < item.options.size(); ++i) {
        if (i) q << '|';
        q << join_ids(item.options[i]);
      }
      q << '\n';
    }
  }
  pack.vocab.save(dir / "vocab.txt");
  const auto latent_path = dir / "latent.txt";
  if (pack.latent_videos.empty() && pack.latent_questions.empty()) {
    std::filesystem::remove(latent_path);
    return;
  }
  std::ofstream l(latent_path);
  for (const auto& v : pack.latent_videos) {
    l << "video " << v.video_id << " frames " << v.frames << " objects " << v.objects << " threshold "
      << format_double(v.threshold) << '\n';
    l << "classes";
    for (int c : v.classes) l << ' ' << c;
    l << '\n';
    for (std::size_t n = 0; n < v.frames; ++n) {
      l << "frame " << n;
      for (std::size_t o = 0; o < v.objects; ++o)
        for (double x : v.boxes[n * v.objects + o]) l << ' ' << format_double(x);
      l << '\n';
    }
  }
  for (const auto& q : pack.latent_questions) {
    l << "question " << q.qa_index << ' ' << kind_name(q.kind) << ' ' << pair_str(q.event) << " options";
    for (const auto& e : q.options) l << ' ' << pair_str(e);
    l << " classes";
    for (const auto& e : q.classes) l << ' ' << pair_str(e);
    l << '\n';
  }
}

FeaturePack read_pack(const std::filesystem::path& dir) {
  FeaturePack pack;
  std::vector<std::string> video_ids;
  std::size_t declared_videos = 0, declared_questions = 0;
  {
    std::ifstream m(dir / "manifest.txt");
    if (!m) throw FormatError("missing manifest.txt in " + dir.string());
    std::string line;
    bool tagged = false;
    while (std::getline(m, line)) {
      if (line.empty() || line[0] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw FormatError("manifest.txt: malformed line '" + line + "'");
      const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
      const std::string where = "manifest.txt " + key;
      if (key == "format") {
        if (value != kFormatTag) throw FormatError("manifest.txt: unsupported format '" + value + "'");
        tagged = true;
      } else if (key == "dataset") {
        pack.dataset = value;
      } else if (key == "task") {
        pack.task = parse_task_field(value);
      } else if (key == "frames") {
        pack.frames = parse_size(value, where);
      } else if (key == "objects") {
        pack.objects_per_frame = parse_size(value, where);
      } else if (key == "frame_dim") {
        pack.frame_dim = parse_size(value, where);
      } else if (key == "object_dim") {
        pack.object_dim = parse_size(value, where);
      } else if (key == "answers") {
        pack.answer_count = parse_size(value, where);
      } else if (key == "videos") {
        declared_videos = parse_size(value, where);
      } else if (key == "questions") {
        declared_questions = parse_size(value, where);
      } else if (key == "video") {
        video_ids.push_back(value);
      } else {
        throw FormatError("manifest.txt: unknown key '" + key + "'");
      }
    }
    if (!tagged) throw FormatError("manifest.txt: missing format tag");
    if (video_ids.size() != declared_videos) throw FormatError("manifest.txt: video count mismatch");
  }
  {
    std::ifstream bin(dir / "tensors.bin", std::ios::binary);
    if (!bin) throw FormatError("missing tensors.bin in " + dir.string());
    const std::size_t k = pack.objects_per_frame;
    for (const auto& id : video_ids) {
      VideoRecord v;
      v.id = id;
      const std::string base = "video " + id + " ";
      expect_extents(read_header(bin, base + "frame_size"), {2}, base + "frame_size");
      auto size = read_values(bin, 2, base + "frame_size");
      v.frame_width = size[0];
      v.frame_height = size[1];

      Shape frames = read_header(bin, base + "frame_features");
      if (frames.size() != 2 || frames[0] == 0 || frames[0] > pack.frames) {
        throw ExtentError("record " + base + "frame_features has extents " + shape_str(frames) +
                          ", manifest allows up to " + std::to_string(pack.frames) + " frames");
      }
      v.frames = frames[0];
      expect_extents(frames, {v.frames, pack.frame_dim}, base + "frame_features");
      v.frame_features = read_values(bin, shape_size(frames), base + "frame_features");

      Shape objects = read_header(bin, base + "object_features");
      expect_extents(objects, {v.frames, k, pack.object_dim}, base + "object_features");
      v.object_features = read_values(bin, shape_size(objects), base + "object_features");

      Shape boxes = read_header(bin, base + "boxes");
      expect_extents(boxes, {v.frames, k, 4}, base + "boxes");
      v.boxes = read_values(bin, shape_size(boxes), base + "boxes");
      pack.videos.push_back(std::move(v));
    }
    if (bin.peek() != std::char_traits<char>::eof()) throw FormatError("tensors.bin has trailing bytes");
  }
  pack.vocab = Vocabulary::load(dir / "vocab.txt");
  {
    std::ifstream q(dir / "qa.txt");
    if (!q) throw FormatError("missing qa.txt in " + dir.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(q, line)) {
      ++line_no;
      if (line.empty()) continue;
      const std::string where = "qa.txt:" + std::to_string(line_no);
      const auto fields = split(line, '\t');
      if (fields.size() != 5) throw FormatError(where + ": expected 5 tab-separated fields");
      QaItem item;
      item.video_id = fields[0];
      item.task = parse_task_field(fields[1]);
      item.question = parse_ids(fields[2], where);
      item.label = static_cast<std::int64_t>(parse_size(fields[3], where));
      if (!fields[4].empty()) {
        for (const auto& opt : split(fields[4], '|')) item.options.push_back(parse_ids(opt, where));
      }
      pack.qa.push_back(std::move(item));
    }
    if (pack.qa.size() != declared_questions) throw FormatError("qa.txt: question count mismatch");
  }
  const auto latent_path = dir / "latent.txt";
  if (std::filesystem::exists(latent_path)) {
    std::ifstream l(latent_path);
    std::string line;
    while (std::getline(l, line)) {
      std::istringstream in(line);
      std::string head;
      in >> head;
      if (head == "video") {
        LatentVideo v;
        std::string key, value;
        in >> v.video_id;
        while (in >> key >> value) {
          if (key == "frames") v.frames = parse_size(value, "latent.txt");
          else if (key == "objects") v.objects = parse_size(value, "latent.txt");
          else if (key == "threshold") v.threshold = parse_double(value, "latent.txt");
        }
        v.boxes.reserve(v.frames * v.objects);
        pack.latent_videos.push_back(std::move(v));
      } else if (head == "classes") {
        if (pack.latent_videos.empty()) throw FormatError("latent.txt: classes before video");
        int c = 0;
        while (in >> c) pack.latent_videos.back().classes.push_back(c);
      } else if (head == "frame") {
        if (pack.latent_videos.empty()) throw FormatError("latent.txt: frame before video");
        auto& v = pack.latent_videos.back();
        std::string n;
        in >> n;
        std::string tok;
        std::vector<double> values;
        while (in >> tok) values.push_back(parse_double(tok, "latent.txt"));
        if (values.size() != v.objects * 4) throw ExtentError("latent.txt: frame " + n + " of " + v.video_id);
        for (std::size_t o = 0; o < v.objects; ++o) {
          v.boxes.push_back({values[4 * o], values[4 * o + 1], values[4 * o + 2], values[4 * o + 3]});
        }
      } else if (head == "question") {
        LatentQuestion q;
        std::string index, kind, event, tok;
        in >> index >> kind >> event;
        q.qa_index = parse_size(index, "latent.txt");
        q.kind = parse_kind(kind);
        q.event = parse_pair(event);
        std::vector<EventPair>* target = nullptr;
        while (in >> tok) {
          if (tok == "options") target = &q.options;
          else if (tok == "classes") target = &q.classes;
          else if (target) target->push_back(parse_pair(tok));
        }
        pack.latent_questions.push_back(std::move(q));
      } else if (!head.empty()) {
        throw FormatError("latent.txt: unknown line '" + head + "'");
      }
    }
  }
  validate_pack(pack);
  return pack;
}

std::vector<std::vector<ObjectRecord>> video_objects(const FeaturePack& pack, const VideoRecord& video) {
  const std::size_t k = pack.objects_per_frame;
  const std::size_t d = pack.object_dim;
  std::vector<std::vector<ObjectRecord>> frames(video.frames);
  for (std::size_t n = 0; n < video.frames; ++n) {
    for (std::size_t o = 0; o < k; ++o) {
      const std::size_t slot = n * k + o;
      ObjectRecord rec;
      rec.feature.assign(video.object_features.begin() + static_cast<std::ptrdiff_t>(slot * d),
                         video.object_features.begin() + static_cast<std::ptrdiff_t>((slot + 1) * d));
      const double* b = video.boxes.data() + slot * 4;
      rec.box = BBox{b[0], b[1], b[2], b[3], video.frame_width, video.frame_height};
      rec.frame = n;
      frames[n].push_back(std::move(rec));
    }
  }
  return frames;
}

Batch pad_batch(const FeaturePack& pack, const std::vector<std::size_t>& qa_indices) {
  if (qa_indices.empty()) throw ContractError("pad_batch: empty batch");
  Batch batch;
  batch.size = qa_indices.size();
  for (auto i : qa_indices) {
    const auto& item = pack.qa.at(i);
    batch.frames = std::max(batch.frames, pack.video(item.video_id).frames);
    batch.words = std::max(batch.words, item.question.size());
  }
  const std::size_t n = batch.frames, k = pack.objects_per_frame;
  const std::size_t df = pack.frame_dim, dr = pack.object_dim;
  std::vector<double> frames(batch.size * n * df, 0.0);
  std::vector<double> objects(batch.size * n * k * dr, 0.0);
  std::vector<double> boxes(batch.size * n * k * 4, 0.0);
  for (std::size_t b = 0; b < batch.size; ++b) {
    const auto& item = pack.qa[qa_indices[b]];
    const auto& video = pack.video(item.video_id);
    if (video.frame_features.size() != video.frames * df || video.object_features.size() != video.frames * k * dr) {
      throw DimensionError("pad_batch: feature width mismatch in video " + video.id);
    }
    std::copy(video.frame_features.begin(), video.frame_features.end(), frames.begin() + b * n * df);
    std::copy(video.object_features.begin(), video.object_features.end(), objects.begin() + b * n * k * dr);
    std::copy(video.boxes.begin(), video.boxes.end(), boxes.begin() + b * n * k * 4);
    std::vector<bool> fmask(n, false);
    for (std::size_t f = 0; f < video.frames; ++f) fmask[f] = true;
    batch.frame_mask.push_back(std::move(fmask));
    std::vector<std::int64_t> words(batch.words, Vocabulary::kPad);
    std::vector<bool> wmask(batch.words, false);
    for (std::size_t w = 0; w < item.question.size(); ++w) {
      words[w] = item.question[w];
      wmask[w] = true;
    }
    batch.questions.push_back(std::move(words));
    batch.question_mask.push_back(std::move(wmask));
    batch.video_ids.push_back(video.id);
    batch.frame_sizes.push_back({video.frame_width, video.frame_height});
  }
  batch.frame_features = Tensor({batch.size, n, df}, std::move(frames));
  batch.object_features = Tensor({batch.size, n, k, dr}, std::move(objects));
  batch.boxes = Tensor({batch.size, n, k, 4}, std::move(boxes));
  return batch;
}

std::pair<VideoRecord, std::vector<std::int64_t>> unbatch(const Batch& batch, std::size_t i) {
  const std::size_t n = batch.frames;
  const std::size_t df = batch.frame_features.dim(2);
  const std::size_t k = batch.object_features.dim(2), dr = batch.object_features.dim(3);
  VideoRecord v;
  v.id = batch.video_ids.at(i);
  v.frame_width = batch.frame_sizes[i][0];
  v.frame_height = batch.frame_sizes[i][1];
  for (bool valid : batch.frame_mask[i]) v.frames += valid ? 1 : 0;
  auto copy = [&](const Tensor& t, std::size_t row) {
    auto data = t.data();
    const auto begin = data.begin() + static_cast<std::ptrdiff_t>(i * n * row);
    return std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(v.frames * row));
  };
  v.frame_features = copy(batch.frame_features, df);
  v.object_features = copy(batch.object_features, k * dr);
  v.boxes = copy(batch.boxes, k * 4);
  std::vector<std::int64_t> question;
  for (std::size_t w = 0; w < batch.words; ++w) {
    if (batch.question_mask[i][w]) question.push_back(batch.questions[i][w]);
  }
  return {std::move(v), std::move(question)};
}

}  // namespace lgcn
