#include "lgcn/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "lgcn/grad_check.hpp"
#include "lgcn/ops.hpp"
#include "lgcn/synthetic.hpp"

namespace lgcn {

bool GradCheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const GradCheckEntry& e) { return e.passed; });
}

std::string GradCheckReport::failures() const {
  std::string out;
  for (const auto& e : entries) {
    if (e.passed) continue;
    if (!out.empty()) out += ",";
    out += e.name;
  }
  return out;
}

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v), true);
}

// Fixed random weights so every checked scalar has O(1) sensitivity to
// each output entry.
Tensor probe(const Tensor& out, std::uint64_t seed = 7) {
  Rng rng(seed);
  std::vector<double> v(out.size());
  for (double& x : v) x = rng.uniform(0.5, 1.5) * (rng.below(2) ? 1.0 : -1.0);
  return Tensor(out.shape(), std::move(v));
}

Tensor weighted(const Tensor& out) { return sum_all(mul(out, probe(out))); }

std::vector<Tensor> with_params(const ParamStore& params, std::vector<Tensor> extra = {}) {
  for (const auto& [name, t] : params.entries()) extra.push_back(t);
  return extra;
}

}  // namespace

GradCheckReport gradcheck_ops(std::uint64_t seed, double tolerance) {
  GradCheckReport report;
  report.tolerance = tolerance;
  Rng rng(seed);
  auto check = [&](const std::string& name, const std::function<Tensor()>& f, std::vector<Tensor> wrt) {
    const double err = grad_check(f, std::move(wrt)).max_rel_error;
    report.entries.push_back({name, err, err < tolerance});
  };

  Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng), c = random_tensor({3, 4}, rng);
  Tensor s = random_tensor({}, rng), bias = random_tensor({4}, rng), v = random_tensor({5}, rng);
  Tensor cube = random_tensor({2, 3, 4}, rng);

  check("matmul", [&] { return weighted(matmul(a, b)); }, {a, b});
  check("transpose", [&] { return weighted(transpose(a)); }, {a});
  check("add", [&] { return weighted(add(a, c)); }, {a, c});
  check("sub", [&] { return weighted(sub(a, c)); }, {a, c});
  check("mul", [&] { return weighted(mul(a, c)); }, {a, c});
  check("mul_scalar", [&] { return weighted(mul(a, s)); }, {a, s});
  check("relu", [&] { return weighted(relu(a)); }, {a});
  check("elu", [&] { return weighted(elu(a)); }, {a});
  check("sigmoid", [&] { return weighted(sigmoid(a)); }, {a});
  check("tanh", [&] { return weighted(tanh(a)); }, {a});
  check("scale", [&] { return weighted(scale(a, -2.5)); }, {a});
  check("add_scalar", [&] { return weighted(add_scalar(a, 0.3)); }, {a});
  check("add_bias", [&] { return weighted(add_bias(a, bias)); }, {a, bias});
  check("softmax_rows", [&] { return weighted(softmax_rows(a)); }, {a});
  check("softmax_vector", [&] { return weighted(softmax_rows(v)); }, {v});
  check("concat_last", [&] { return weighted(concat_last({a, c, matmul(a, transpose(a))})); }, {a, c});
  check("concat_rows", [&] { return weighted(concat_rows(std::vector<Tensor>{a, c})); }, {a, c});
  check("slice_last", [&] { return weighted(slice_last(a, 1, 2)); }, {a});
  check("slice_rows", [&] { return weighted(slice_rows(a, 1, 2)); }, {a});
  check("reshape", [&] { return weighted(reshape(a, {2, 6})); }, {a});
  check("gather_rows", [&] {
    const std::vector<std::int64_t> idx{2, 0, -1, 2};
    return weighted(gather_rows(a, idx));
  }, {a});
  check("reduce_mean", [&] { return weighted(reduce(cube, Reduce::kMean, 1)); }, {cube});
  check("reduce_max", [&] { return weighted(reduce(cube, Reduce::kMax, 2)); }, {cube});
  check("reduce_sum", [&] { return weighted(reduce(cube, Reduce::kSum, 0)); }, {cube});
  check("sum_all", [&] { return sum_all(mul(a, a)); }, {a});
  check("cross_entropy", [&] { return cross_entropy(reshape(v, {1, 5}), 3); }, {v});

  {
    ParamStore p;
    Linear lin = Linear::create(p, "lin", 4, 3, rng);
    Tensor x = random_tensor({5, 4}, rng);
    for (const auto& [n, t] : p.entries()) {
      Tensor h = t;
      for (double& e : h.mutable_data()) e = rng.uniform(-1.0, 1.0);
    }
    check("linear", [&] { return weighted(linear_forward(lin, x)); }, with_params(p, {x}));
  }
  for (Activation act : {Activation::kRelu, Activation::kElu}) {
    ParamStore p;
    Mlp mlp = Mlp::create(p, "mlp", 4, 6, 3, act, rng);
    Tensor x = random_tensor({5, 4}, rng);
    check(act == Activation::kRelu ? "mlp_relu" : "mlp_elu", [&] { return weighted(mlp_forward(mlp, x)); },
          with_params(p, {x}));
  }
  {
    ParamStore p;
    Highway hw = Highway::create(p, "hw", 4, rng);
    Tensor x = random_tensor({3, 4}, rng);
    check("highway", [&] { return weighted(highway_forward(hw, x)); }, with_params(p, {x}));
  }
  {
    ParamStore p;
    EmbeddingTable table = EmbeddingTable::create(p, "emb", 6, 3, rng);
    const std::vector<std::int64_t> ids{2, 0, 5, 2, 1};
    check("embedding", [&] { return weighted(embedding_lookup(table, ids)); }, with_params(p));
  }
  {
    ParamStore p;
    Conv1d conv = Conv1d::create(p, "conv", 3, 4, 3, rng);
    Tensor x = random_tensor({5, 3}, rng);
    check("conv1d", [&] { return weighted(conv1d_forward(conv, x)); }, with_params(p, {x}));
  }
  {
    ParamStore p;
    Conv2d conv = Conv2d::create(p, "conv2d", 2, 3, 4, rng);
    Tensor x = random_tensor({2, 5, 3}, rng);
    check("char_cnn", [&] { return weighted(char_cnn(conv, x)); }, with_params(p, {x}));
  }
  {
    ParamStore p;
    LstmCell cell = LstmCell::create(p, "lstm", 3, 2, rng);
    Tensor x = random_tensor({4, 3}, rng);
    check("lstm_forward", [&] { return weighted(lstm_sequence(cell, x, 4, false)); }, with_params(p, {x}));
    check("lstm_reverse", [&] { return weighted(lstm_sequence(cell, x, 3, true)); }, with_params(p, {x}));
  }
  {
    ParamStore p;
    BiLstm rnn = BiLstm::create(p, "bilstm", 3, 2, rng);
    Tensor x = random_tensor({4, 3}, rng);
    check("bilstm", [&] { return weighted(bilstm_forward(rnn, x, 3)); }, with_params(p, {x}));
  }
  {
    ParamStore p;
    Mlp mlp = Mlp::create(p, "spatial", 4, 5, 3, Activation::kRelu, rng);
    std::vector<BBox> boxes{{10, 20, 30, 40, 100, 80}, {50, 5, 20, 10, 100, 80}, {0, 0, 100, 80, 100, 80}};
    check("encode_spatial", [&] { return weighted(encode_spatial(boxes, mlp)); }, with_params(p));
  }
  {
    Tensor x = random_tensor({4, 5}, rng), w1 = random_tensor({5, 3}, rng), w2 = random_tensor({5, 3}, rng);
    check("adjacency", [&] { return weighted(compute_adjacency(x, w1, w2)); }, {x, w1, w2});
    // Wider weights than the default init keep the second adjacency away
    // from uniform; otherwise its projections get gradients at the rounding
    // floor of the difference quotient.
    ParamStore p;
    GcnParams gcn = GcnParams::create(p, "gcn", 5, 3, 2, rng);
    for (const auto& [n, t] : p.entries()) {
      Tensor h = t;
      for (double& e : h.mutable_data()) e = rng.uniform(-1.5, 1.5);
    }
    check("gcn", [&] { return weighted(gcn_forward(x, gcn).regional); }, with_params(p, {x}));
  }
  {
    ParamStore p;
    Conv1d conv = Conv1d::create(p, "global", 3, 2, 3, rng);
    Tensor frames = random_tensor({3, 3}, rng);
    check("global_context", [&] { return weighted(global_context(frames, conv, 2)); }, with_params(p, {frames}));
    Mlp mlp = Mlp::create(p, "fusion", 6, 4, 4, Activation::kElu, rng);
    Tensor regional = random_tensor({6, 4}, rng);
    check("fuse_visual", [&] { return weighted(fuse_visual(regional, global_context(frames, conv, 2), mlp)); },
          with_params(p, {frames, regional}));
  }
  {
    Tensor visual = random_tensor({4, 6}, rng), text = random_tensor({3, 6}, rng), answer = random_tensor({3, 6}, rng);
    const std::vector<bool> mask{true, true, false};
    check("attend", [&] { return weighted(attend(visual, text, mask).attended); }, {visual, text});
    ParamStore p;
    BiLstm rnn3 = BiLstm::create(p, "out3", 18, 3, rng);
    check("vq_interact", [&] { return weighted(vq_interact(visual, {text, mask}, rnn3).pooled); },
          with_params(p, {visual, text}));
    ParamStore q;
    BiLstm rnn5 = BiLstm::create(q, "out5", 30, 3, rng);
    check("vq_interact_answer",
          [&] { return weighted(vq_interact(visual, {text, mask}, rnn5, TextInput{answer, mask}).pooled); },
          with_params(q, {visual, text, answer}));
  }
  {
    ParamStore p;
    Linear head = Linear::create(p, "head", 4, 1, rng);
    Tensor o1 = random_tensor({1, 4}, rng), o2 = random_tensor({1, 4}, rng), o3 = random_tensor({1, 4}, rng);
    // The shared bias shifts every option score equally, so its gradient is
    // identically zero and the difference quotient is pure rounding noise.
    check("mc_loss", [&] { return mc_loss(mc_score({o1, o2, o3}, head), 1); }, {head.weight, o1, o2, o3});
    ParamStore q;
    Linear open = Linear::create(q, "open", 4, 5, rng);
    check("open_ended_loss", [&] { return open_ended_loss(open_ended_head(o1, open), 4); }, with_params(q, {o1}));
    ParamStore r;
    Linear count = Linear::create(r, "count", 4, 1, rng);
    check("count_loss", [&] { return count_loss(count_head(o1, count), 3); }, with_params(r, {o1}));
  }
  return report;
}

FeaturePack tiny_pack(TaskType task, std::uint64_t seed) {
  Rng rng(seed);
  FeaturePack pack;
  pack.dataset = "tiny";
  pack.frames = 2;
  pack.objects_per_frame = 2;
  pack.frame_dim = 3;
  pack.object_dim = 3;
  pack.task = task;
  pack.answer_count = task == TaskType::kMultipleChoice ? 2 : task == TaskType::kOpenEnded ? 3 : kMaxCount + 1;
  pack.vocab = synthetic_vocabulary(4);
  VideoRecord video;
  video.id = "tiny0";
  video.frames = 2;
  video.frame_width = 32.0;
  video.frame_height = 24.0;
  for (int i = 0; i < 6; ++i) video.frame_features.push_back(rng.uniform(-1.0, 1.0));
  for (int i = 0; i < 12; ++i) video.object_features.push_back(rng.uniform(-1.0, 1.0));
  for (int i = 0; i < 4; ++i) {
    const double w = rng.uniform(4.0, 10.0), h = rng.uniform(4.0, 10.0);
    video.boxes.insert(video.boxes.end(), {rng.uniform(0.0, 32.0 - w), rng.uniform(0.0, 24.0 - h), w, h});
  }
  pack.videos.push_back(video);
  auto ids = [&](const std::string& text) {
    std::vector<std::int64_t> out;
    for (const auto& t : tokenize(text)) out.push_back(pack.vocab.id(t));
    return out;
  };
  QaItem qa;
  qa.video_id = video.id;
  qa.task = task;
  switch (task) {
    case TaskType::kMultipleChoice:
      qa.question = ids("what happens before");
      qa.options = {ids("dog meets cat"), ids("person meets ball")};
      qa.label = 1;
      break;
    case TaskType::kOpenEnded:
      qa.question = ids("what event occurs");
      qa.label = 2;
      break;
    case TaskType::kCount:
      qa.question = ids("how many times");
      qa.label = 1;
      break;
  }
  pack.qa.push_back(qa);
  return pack;
}

GradCheckReport gradcheck_pipeline(const Config& config, TaskType task, double tolerance, double eps) {
  Config c = config;
  c.task = task;
  FeaturePack pack = tiny_pack(task, c.seed);
  c.objects = pack.objects_per_frame;
  Model model = Model::create(c, ModelShape::of(pack));
  std::vector<Tensor> wrt;
  std::vector<std::string> names;
  for (const auto& [name, t] : model.params.entries()) {
    if (task == TaskType::kMultipleChoice && name == "head.bias") continue;  // shift invariant, see gradcheck_ops
    wrt.push_back(t);
    names.push_back(name);
  }
  GradCheckResult result = grad_check([&] { return forward(model, pack, 0).loss; }, wrt, eps);
  GradCheckReport report;
  report.tolerance = tolerance;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double err = result.per_tensor_normwise[i];
    report.entries.push_back({std::string(task_name(task)) + ":" + names[i], err, err < tolerance});
  }
  return report;
}

GradCheckReport gradcheck_cmd(const Config& config, double tolerance, double eps) {
  GradCheckReport report = gradcheck_ops(config.seed, tolerance);
  for (TaskType task : {TaskType::kMultipleChoice, TaskType::kOpenEnded, TaskType::kCount}) {
    GradCheckReport part = gradcheck_pipeline(config, task, tolerance, eps);
    report.entries.insert(report.entries.end(), part.entries.begin(), part.entries.end());
  }
  return report;
}

AdjacencyDump dump_adjacency(const Model& model, const FeaturePack& pack, const std::string& video_id,
                             std::size_t layer, const std::filesystem::path& prefix) {
  const VideoRecord* video = nullptr;
  for (const auto& v : pack.videos)
    if (v.id == video_id) video = &v;
  if (!video) throw std::out_of_range("unknown video id: " + video_id);
  if (layer < 1 || layer > model.config.gcn_layers) {
    throw std::out_of_range("layer " + std::to_string(layer) + " outside 1.." + std::to_string(model.config.gcn_layers));
  }
  AdjacencyDump dump;
  dump.matrix = video_adjacency(model, *video).at(layer - 1);
  const std::size_t n = dump.matrix.dim(0);
  if (prefix.has_parent_path()) std::filesystem::create_directories(prefix.parent_path());
  dump.csv = prefix;
  dump.csv += ".csv";
  dump.pgm = prefix;
  dump.pgm += ".pgm";

  std::ofstream csv(dump.csv);
  if (!csv) throw std::runtime_error("cannot write " + dump.csv.string());
  char buf[32];
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", dump.matrix.at(i, j));
      csv << (j ? "," : "") << buf;
    }
    csv << '\n';
  }
  std::ofstream pgm(dump.pgm, std::ios::binary);
  if (!pgm) throw std::runtime_error("cannot write " + dump.pgm.string());
  pgm << "P5\n" << n << ' ' << n << "\n255\n";
  for (std::size_t i = 0; i < n * n; ++i) {
    const double value = std::clamp(dump.matrix.at(i), 0.0, 1.0);
    pgm.put(static_cast<char>(static_cast<unsigned char>(std::lround(value * 255.0))));
  }
  return dump;
}

const std::vector<std::string>& variant_names() {
  static const std::vector<std::string> names = {"baseline", "of", "gcn", "full", "fc", "lstm", "loc_t", "loc_s"};
  return names;
}

std::string variant_label(const std::string& variant) {
  static const std::map<std::string, std::string> labels = {
      {"baseline", "baseline"},          {"of", "baseline+OF"},
      {"gcn", "baseline+OF+GCNs"},       {"full", "baseline+OF+GCNs+Loc"},
      {"fc", "baseline+OF+FC+Loc"},      {"lstm", "baseline+OF+LSTM+Loc"},
      {"loc_t", "baseline+OF+GCNs+Loc_T"}, {"loc_s", "baseline+OF+GCNs+Loc_S"},
  };
  auto it = labels.find(variant);
  if (it == labels.end()) throw std::invalid_argument("unknown ablation variant: " + variant);
  return it->second;
}

Config apply_variant(const Config& base, const std::string& variant) {
  Config c = base;
  if (variant == "baseline") {
    c.use_objects = false;
  } else if (variant == "of") {
    c.use_objects = true;
    c.relation = Relation::kNone;
    c.use_spatial_loc = c.use_temporal_loc = false;
  } else if (variant == "gcn") {
    c.use_objects = true;
    c.relation = Relation::kGcn;
    c.use_spatial_loc = c.use_temporal_loc = false;
  } else if (variant == "full") {
    c.use_objects = true;
    c.relation = Relation::kGcn;
    c.use_spatial_loc = c.use_temporal_loc = true;
  } else if (variant == "fc" || variant == "lstm") {
    c.use_objects = true;
    c.relation = variant == "fc" ? Relation::kFc : Relation::kLstm;
    c.use_spatial_loc = c.use_temporal_loc = true;
  } else if (variant == "loc_t") {
    c.use_objects = true;
    c.relation = Relation::kGcn;
    c.use_spatial_loc = false;
    c.use_temporal_loc = true;
  } else if (variant == "loc_s") {
    c.use_objects = true;
    c.relation = Relation::kGcn;
    c.use_spatial_loc = true;
    c.use_temporal_loc = false;
  } else {
    throw std::invalid_argument("unknown ablation variant: " + variant);
  }
  return c;
}

std::vector<AblationRow> ablate(const Config& base, const std::vector<std::string>& variants,
                                const FeaturePack& train_pack, const FeaturePack* val_pack,
                                const FeaturePack& test_pack, const TrainOptions& options) {
  for (const auto& v : variants) variant_label(v);
  std::vector<AblationRow> rows;
  for (const auto& v : variants) {
    AblationRow row;
    row.variant = v;
    row.label = variant_label(v);
    Model model = build_model(apply_variant(base, v), train_pack);
    row.report = train(model, train_pack, val_pack, options);
    row.metric = evaluate(model, test_pack).metric;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_ablation(const std::vector<AblationRow>& rows, TaskType task) {
  std::ostringstream out;
  const char* metric = task == TaskType::kCount ? "mse" : "accuracy";
  char line[160];
  std::snprintf(line, sizeof line, "%-28s %10s %10s\n", "method", metric, "seconds");
  out << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-28s %10.4f %10.1f\n", r.label.c_str(), r.metric, r.report.wall_seconds);
    out << line;
  }
  return out.str();
}

}  // namespace lgcn
