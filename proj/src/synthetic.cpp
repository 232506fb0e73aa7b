#include "lgcn/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "lgcn/rng.hpp"

namespace lgcn {

namespace {

constexpr std::size_t kMaxAttempts = 1000;
constexpr double kBoxMin = 16.0;
constexpr double kBoxMax = 32.0;

const std::vector<std::string> kClassNames = {"person", "dog",   "cat", "ball", "car",   "bike",
                                              "bird",   "horse", "cup", "box",  "chair", "tree"};

const std::vector<std::string> kTemplateWords = {"what", "happens", "before", "after", "meets",
                                                 "how",  "many",    "times",  "event", "occurs"};

struct Placement {
  std::vector<std::array<double, 2>> centers;  // per object
};

std::string event_phrase(const EventPair& e) { return kClassNames[e.first] + " meets " + kClassNames[e.second]; }

std::vector<std::int64_t> encode(const Vocabulary& vocab, const std::string& text) {
  std::vector<std::int64_t> ids;
  for (const auto& token : tokenize(text)) ids.push_back(vocab.id(token));
  return ids;
}

double distance(const std::array<double, 2>& a, const std::array<double, 2>& b) {
  return std::hypot(a[0] - b[0], a[1] - b[1]);
}

// Places every object of one frame. Planned pairs end up within half the
// threshold of each other; every other pair is kept at least twice the
// threshold apart when that is geometrically possible.
std::vector<std::array<double, 2>> place_frame(const SyntheticSpec& spec, std::size_t objects,
                                               const std::vector<std::pair<std::size_t, std::size_t>>& planned,
                                               Rng& rng) {
  const double margin = kBoxMax / 2.0;
  const double near = std::min(spec.threshold / 2.0, 16.0);
  const double far = 2.0 * spec.threshold;
  const bool separable = std::isfinite(far) && far < std::min(spec.frame_width, spec.frame_height) / 2.0;
  auto random_center = [&](double inset) {
    return std::array<double, 2>{rng.uniform(margin + inset, spec.frame_width - margin - inset),
                                 rng.uniform(margin + inset, spec.frame_height - margin - inset)};
  };
  for (std::size_t attempt = 0; attempt < 200; ++attempt) {
    std::vector<std::array<double, 2>> centers(objects);
    std::vector<bool> placed(objects, false);
    std::vector<int> group(objects, -1);
    bool ok = true;
    auto clear_of_others = [&](const std::array<double, 2>& c, int own_group) {
      if (!separable) return true;
      for (std::size_t o = 0; o < objects; ++o) {
        if (placed[o] && (own_group < 0 || group[o] != own_group) && distance(c, centers[o]) < far) return false;
      }
      return true;
    };
    for (std::size_t p = 0; p < planned.size() && ok; ++p) {
      const auto [a, b] = planned[p];
      const auto ca = random_center(near);
      const double r = rng.uniform(0.0, near);
      const double theta = rng.uniform(0.0, 2.0 * 3.141592653589793);
      const std::array<double, 2> cb{ca[0] + r * std::cos(theta), ca[1] + r * std::sin(theta)};
      if (!clear_of_others(ca, -1) || !clear_of_others(cb, -1)) {
        ok = false;
        break;
      }
      centers[a] = ca;
      centers[b] = cb;
      placed[a] = placed[b] = true;
      group[a] = group[b] = static_cast<int>(p);
    }
    for (std::size_t o = 0; o < objects && ok; ++o) {
      if (placed[o]) continue;
      bool found = false;
      for (std::size_t tries = 0; tries < 100 && !found; ++tries) {
        const auto c = random_center(0.0);
        if (clear_of_others(c, -1)) {
          centers[o] = c;
          placed[o] = true;
          found = true;
        }
      }
      ok = found;
    }
    if (ok) return centers;
  }
  throw std::invalid_argument("synthetic spec infeasible: cannot separate objects within the frame");
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
  return seed * 0x9e3779b97f4a7c15ULL ^ (stream + 0x632be59bd9b4e019ULL) * 0xbf58476d1ce4e5b9ULL;
}

}  // namespace

const char* synthetic_task_name(SyntheticTask task) {
  switch (task) {
    case SyntheticTask::kOrder: return "order";
    case SyntheticTask::kAction: return "action";
    case SyntheticTask::kCount: return "count";
  }
  return "?";
}

SyntheticTask parse_synthetic_task(const std::string& name) {
  if (name == "order") return SyntheticTask::kOrder;
  if (name == "action") return SyntheticTask::kAction;
  if (name == "count") return SyntheticTask::kCount;
  throw std::invalid_argument("unknown synthetic task: " + name);
}

void SyntheticSpec::validate() const {
  if (frames == 0 || objects == 0 || feature_dim == 0) throw std::invalid_argument("synthetic spec: zero extent");
  if (classes > kClassNames.size()) {
    throw std::invalid_argument("synthetic spec: at most " + std::to_string(kClassNames.size()) + " classes");
  }
  if (objects > classes) throw std::invalid_argument("synthetic spec: objects need distinct classes");
  if (objects < 2) throw std::invalid_argument("synthetic spec: interaction tasks need K >= 2");
  if (!(noise >= 0.0) || !(threshold > 0.0)) throw std::invalid_argument("synthetic spec: bad noise or threshold");
  if (frame_width <= 2 * kBoxMax || frame_height <= 2 * kBoxMax) {
    throw std::invalid_argument("synthetic spec: frame too small");
  }
  if (task == SyntheticTask::kOrder) {
    if (frames < 3) throw std::invalid_argument("synthetic spec: order task needs at least 3 frames");
    const std::size_t spare = classes - objects;
    if (objects < 5) throw std::invalid_argument("synthetic spec: order task needs K >= 5");
    if (options < 2 || (options > 2 && spare * (spare - 1) / 2 < options - 2)) {
      throw std::invalid_argument("synthetic spec: order task needs C(classes - K, 2) >= options - 2 absent pairs");
    }
  }
  if (noise > 0.0 && std::sqrt(2.0) <= 4.0 * noise) {
    throw std::invalid_argument("synthetic spec: noise too large for distinguishable prototypes");
  }
}

SyntheticSpec SyntheticSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read synthetic spec " + path.string());
  SyntheticSpec spec;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("synthetic spec: malformed line '" + line + "'");
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "seed") spec.seed = std::stoull(value);
    else if (key == "frames") spec.frames = std::stoul(value);
    else if (key == "objects") spec.objects = std::stoul(value);
    else if (key == "classes") spec.classes = std::stoul(value);
    else if (key == "feature_dim") spec.feature_dim = std::stoul(value);
    else if (key == "noise") spec.noise = std::stod(value);
    else if (key == "threshold") spec.threshold = value == "inf" ? std::numeric_limits<double>::infinity() : std::stod(value);
    else if (key == "task") spec.task = parse_synthetic_task(value);
    else if (key == "options") spec.options = std::stoul(value);
    else if (key == "frame_width") spec.frame_width = std::stod(value);
    else if (key == "frame_height") spec.frame_height = std::stod(value);
    else if (key == "train_count") spec.train_count = std::stoul(value);
    else if (key == "val_count") spec.val_count = std::stoul(value);
    else throw std::invalid_argument("synthetic spec: unknown key '" + key + "'");
  }
  spec.validate();
  return spec;
}

void SyntheticSpec::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  out << "seed=" << seed << "\nframes=" << frames << "\nobjects=" << objects << "\nclasses=" << classes
      << "\nfeature_dim=" << feature_dim << "\nnoise=" << noise << "\nthreshold=" << threshold
      << "\ntask=" << synthetic_task_name(task) << "\noptions=" << options << "\nframe_width=" << frame_width
      << "\nframe_height=" << frame_height << "\ntrain_count=" << train_count << "\nval_count=" << val_count << '\n';
}

const std::vector<std::string>& synthetic_class_names() { return kClassNames; }

Vocabulary synthetic_vocabulary(std::size_t classes) {
  std::vector<std::string> corpus(kTemplateWords.begin(), kTemplateWords.end());
  for (std::size_t c = 0; c < classes; ++c) corpus.push_back(kClassNames[c]);
  return build_vocab(corpus);
}

std::vector<std::vector<double>> class_prototypes(const SyntheticSpec& spec) {
  Rng rng(mix(spec.seed, 0xc1a55ULL));
  for (std::size_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
    std::vector<std::vector<double>> protos(spec.classes, std::vector<double>(spec.feature_dim));
    for (auto& p : protos) {
      double norm = 0.0;
      for (auto& v : p) {
        v = rng.normal();
        norm += v * v;
      }
      norm = std::sqrt(norm);
      for (auto& v : p) v /= norm;
    }
    double closest = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < protos.size(); ++i)
      for (std::size_t j = i + 1; j < protos.size(); ++j) {
        double d = 0.0;
        for (std::size_t k = 0; k < spec.feature_dim; ++k) d += (protos[i][k] - protos[j][k]) * (protos[i][k] - protos[j][k]);
        closest = std::min(closest, std::sqrt(d));
      }
    if (closest > 4.0 * spec.noise) return protos;
  }
  throw std::invalid_argument("synthetic spec: cannot draw distinguishable prototypes");
}

EventPair make_event(int a, int b) { return a < b ? EventPair{a, b} : EventPair{b, a}; }

std::vector<EventPair> all_events(std::size_t classes) {
  std::vector<EventPair> events;
  for (int a = 0; a < static_cast<int>(classes); ++a)
    for (int b = a + 1; b < static_cast<int>(classes); ++b) events.push_back({a, b});
  return events;
}

std::vector<bool> event_frames(const LatentVideo& video, const EventPair& event) {
  std::vector<bool> hits(video.frames, false);
  for (std::size_t n = 0; n < video.frames; ++n) {
    for (std::size_t i = 0; i < video.objects && !hits[n]; ++i) {
      for (std::size_t j = 0; j < video.objects; ++j) {
        if (i == j || video.classes[i] != event.first || video.classes[j] != event.second) continue;
        const auto& bi = video.boxes[n * video.objects + i];
        const auto& bj = video.boxes[n * video.objects + j];
        const double dx = (bi[0] + bi[2] / 2.0) - (bj[0] + bj[2] / 2.0);
        const double dy = (bi[1] + bi[3] / 2.0) - (bj[1] + bj[3] / 2.0);
        if (std::sqrt(dx * dx + dy * dy) <= video.threshold) {
          hits[n] = true;
          break;
        }
      }
    }
  }
  return hits;
}

std::int64_t oracle_answer(const LatentVideo& video, const LatentQuestion& question) {
  auto first_frame = [&](const EventPair& e) -> std::int64_t {
    const auto hits = event_frames(video, e);
    for (std::size_t n = 0; n < hits.size(); ++n)
      if (hits[n]) return static_cast<std::int64_t>(n);
    return -1;
  };
  switch (question.kind) {
    case QuestionKind::kBefore:
    case QuestionKind::kAfter: {
      const std::int64_t anchor = first_frame(question.event);
      if (anchor < 0) throw OracleError("referenced event does not occur");
      const bool before = question.kind == QuestionKind::kBefore;
      std::int64_t best = -1, best_frame = 0;
      bool tie = false;
      for (std::size_t i = 0; i < question.options.size(); ++i) {
        const std::int64_t f = first_frame(question.options[i]);
        if (f < 0 || f == anchor || (before ? f > anchor : f < anchor)) continue;
        const bool better = best < 0 || (before ? f > best_frame : f < best_frame);
        if (best >= 0 && f == best_frame) tie = true;
        if (better) {
          best = static_cast<std::int64_t>(i);
          best_frame = f;
          tie = false;
        }
      }
      if (best < 0) throw OracleError("no option satisfies the temporal relation");
      if (tie) throw OracleError("ambiguous temporal relation");
      return best;
    }
    case QuestionKind::kCount: {
      const auto hits = event_frames(video, question.event);
      const auto count = std::count(hits.begin(), hits.end(), true);
      return std::min<std::int64_t>(count, kMaxCount);
    }
    case QuestionKind::kWhat: {
      std::int64_t found = -1;
      for (std::size_t i = 0; i < question.classes.size(); ++i) {
        if (first_frame(question.classes[i]) < 0) continue;
        if (found >= 0) throw OracleError("more than one event occurs");
        found = static_cast<std::int64_t>(i);
      }
      if (found < 0) throw OracleError("no event occurs");
      return found;
    }
  }
  throw OracleError("unknown question kind");
}

FeaturePack generate_synthetic(const SyntheticSpec& spec, std::size_t count, std::uint64_t stream) {
  spec.validate();
  Rng rng(mix(spec.seed, stream));
  const auto protos = class_prototypes(spec);
  const std::size_t k = spec.objects;
  const std::size_t n_frames = spec.frames;

  FeaturePack pack;
  pack.dataset = std::string("synthetic-") + synthetic_task_name(spec.task);
  pack.frames = n_frames;
  pack.objects_per_frame = k;
  pack.frame_dim = spec.feature_dim;
  pack.object_dim = spec.feature_dim;
  pack.vocab = synthetic_vocabulary(spec.classes);
  const auto answer_set = all_events(spec.classes);
  switch (spec.task) {
    case SyntheticTask::kOrder:
      pack.task = TaskType::kMultipleChoice;
      pack.answer_count = spec.options;
      break;
    case SyntheticTask::kAction:
      pack.task = TaskType::kOpenEnded;
      pack.answer_count = answer_set.size();
      break;
    case SyntheticTask::kCount:
      pack.task = TaskType::kCount;
      pack.answer_count = kMaxCount + 1;
      break;
  }

  std::vector<std::pair<std::size_t, std::size_t>> object_pairs;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) object_pairs.emplace_back(i, j);

  for (std::size_t index = 0; index < count; ++index) {
    bool done = false;
    for (std::size_t attempt = 0; attempt < kMaxAttempts && !done; ++attempt) {
      LatentVideo latent;
      latent.video_id = "s" + std::to_string(stream) + "v" + std::to_string(index);
      latent.frames = n_frames;
      latent.objects = k;
      latent.threshold = spec.threshold;
      std::vector<int> class_pool(spec.classes);
      for (std::size_t c = 0; c < spec.classes; ++c) class_pool[c] = static_cast<int>(c);
      rng.shuffle(class_pool);
      latent.classes.assign(class_pool.begin(), class_pool.begin() + static_cast<std::ptrdiff_t>(k));
      auto event_of = [&](const std::pair<std::size_t, std::size_t>& p) {
        return make_event(latent.classes[p.first], latent.classes[p.second]);
      };

      std::vector<std::vector<std::pair<std::size_t, std::size_t>>> plan(n_frames);
      LatentQuestion question;
      question.qa_index = index;
      std::string text;
      std::vector<std::string> option_texts;
      std::int64_t planned_label = -1;

      auto pairs = object_pairs;
      rng.shuffle(pairs);
      if (spec.task == SyntheticTask::kOrder) {
        // The two answerable events share no object, so each option names a
        // pair of objects that meet only in that option's frames. The
        // reference event shares its object with the later one when K = 5;
        // from K = 6 all three are disjoint.
        std::vector<std::size_t> slot(k);
        for (std::size_t o = 0; o < k; ++o) slot[o] = o;
        rng.shuffle(slot);
        pairs[0] = {std::min(slot[0], slot[1]), std::max(slot[0], slot[1])};
        pairs[1] = {std::min(slot[2], slot[3]), std::max(slot[2], slot[3])};
        const std::size_t last = k >= 6 ? slot[5] : slot[2];
        pairs[2] = {std::min(slot[4], last), std::max(slot[4], last)};
        std::size_t lengths[3];
        std::size_t used = 0;
        for (auto& l : lengths) {
          l = 1 + rng.below(2);
          used += l;
        }
        while (used > n_frames) {
          for (auto& l : lengths)
            if (l > 1 && used > n_frames) {
              --l;
              --used;
            }
        }
        std::size_t gaps[4] = {0, 0, 0, 0};
        for (std::size_t s = used; s < n_frames; ++s) ++gaps[rng.below(4)];
        std::size_t cursor = gaps[0];
        for (std::size_t e = 0; e < 3; ++e) {
          for (std::size_t f = 0; f < lengths[e]; ++f) plan[cursor + f].push_back(pairs[e]);
          cursor += lengths[e] + gaps[e + 1];
        }
        const bool before = rng.below(2) == 0;
        question.kind = before ? QuestionKind::kBefore : QuestionKind::kAfter;
        question.event = event_of(pairs[1]);
        const EventPair answer = event_of(before ? pairs[0] : pairs[2]);
        // Distractors pair up classes that are absent from the video, so only
        // the two non-reference events are plausible and order decides.
        std::vector<EventPair> others{event_of(before ? pairs[2] : pairs[0])};
        std::vector<int> absent(class_pool.begin() + static_cast<std::ptrdiff_t>(k), class_pool.end());
        auto distractors = all_events(absent.size());
        rng.shuffle(distractors);
        for (std::size_t d = 0; others.size() + 1 < spec.options; ++d) {
          others.push_back(make_event(absent[distractors[d].first], absent[distractors[d].second]));
        }
        rng.shuffle(others);
        planned_label = static_cast<std::int64_t>(rng.below(spec.options));
        for (std::size_t slot = 0, o = 0; slot < spec.options; ++slot) {
          question.options.push_back(slot == static_cast<std::size_t>(planned_label) ? answer : others[o++]);
        }
        text = std::string("what happens ") + (before ? "before " : "after ") + event_phrase(question.event);
        for (const auto& opt : question.options) option_texts.push_back(event_phrase(opt));
      } else if (spec.task == SyntheticTask::kCount) {
        const auto target = pairs[0];
        question.kind = QuestionKind::kCount;
        question.event = event_of(target);
        const std::size_t max_count = std::min<std::size_t>(n_frames, kMaxCount);
        const std::size_t c = rng.below(max_count + 1);
        std::vector<std::size_t> frame_order(n_frames);
        for (std::size_t f = 0; f < n_frames; ++f) frame_order[f] = f;
        rng.shuffle(frame_order);
        for (std::size_t f = 0; f < c; ++f) plan[frame_order[f]].push_back(target);
        for (std::size_t f = 0; f < n_frames; ++f) {
          if (rng.below(2) == 0) continue;
          std::vector<std::pair<std::size_t, std::size_t>> candidates;
          for (std::size_t p = 1; p < pairs.size(); ++p) {
            const auto& q = pairs[p];
            const bool shares = plan[f].empty() ? false
                                                : (q.first == target.first || q.first == target.second ||
                                                   q.second == target.first || q.second == target.second);
            if (!shares) candidates.push_back(q);
          }
          if (!candidates.empty()) plan[f].push_back(candidates[rng.below(candidates.size())]);
        }
        text = "how many times " + event_phrase(question.event);
      } else {
        const auto target = pairs[0];
        question.kind = QuestionKind::kWhat;
        question.event = event_of(target);
        question.classes = answer_set;
        const std::size_t length = 1 + rng.below(n_frames);
        const std::size_t start = rng.below(n_frames - length + 1);
        for (std::size_t f = start; f < start + length; ++f) plan[f].push_back(target);
        text = "what event occurs";
      }

      try {
        latent.boxes.reserve(n_frames * k);
        for (std::size_t f = 0; f < n_frames; ++f) {
          const auto centers = place_frame(spec, k, plan[f], rng);
          for (std::size_t o = 0; o < k; ++o) {
            const double w = rng.uniform(kBoxMin, kBoxMax);
            const double h = rng.uniform(kBoxMin, kBoxMax);
            latent.boxes.push_back({centers[o][0] - w / 2.0, centers[o][1] - h / 2.0, w, h});
          }
        }
      } catch (const std::invalid_argument&) {
        continue;
      }

      std::int64_t label = 0;
      try {
        label = oracle_answer(latent, question);
      } catch (const OracleError&) {
        continue;
      }
      if (planned_label >= 0 && label != planned_label) continue;

      VideoRecord video;
      video.id = latent.video_id;
      video.frames = n_frames;
      video.frame_width = spec.frame_width;
      video.frame_height = spec.frame_height;
      // Frame features carry no class content: whatever the model knows
      // about which objects are present must come through the detections.
      for (std::size_t f = 0; f < n_frames; ++f) {
        for (std::size_t o = 0; o < k; ++o) {
          const auto& proto = protos[static_cast<std::size_t>(latent.classes[o])];
          for (std::size_t d = 0; d < spec.feature_dim; ++d)
            video.object_features.push_back(proto[d] + spec.noise * rng.normal());
          const auto& b = latent.boxes[f * k + o];
          video.boxes.insert(video.boxes.end(), b.begin(), b.end());
        }
        for (std::size_t d = 0; d < spec.feature_dim; ++d) video.frame_features.push_back(spec.noise * rng.normal());
      }

      QaItem item;
      item.video_id = video.id;
      item.task = pack.task;
      item.question = encode(pack.vocab, text);
      for (const auto& opt : option_texts) item.options.push_back(encode(pack.vocab, opt));
      item.label = label;

      pack.videos.push_back(std::move(video));
      pack.qa.push_back(std::move(item));
      pack.latent_videos.push_back(std::move(latent));
      pack.latent_questions.push_back(std::move(question));
      done = true;
    }
    if (!done) throw std::invalid_argument("synthetic spec infeasible: no valid sample after repeated attempts");
  }
  return pack;
}

}  // namespace lgcn
