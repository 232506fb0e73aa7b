#include "lgcn/model.hpp"

#include <fstream>

#include "lgcn/ops.hpp"

namespace lgcn {

ModelShape ModelShape::of(const FeaturePack& pack) {
  ModelShape s;
  s.word_vocab = pack.vocab.size();
  s.char_vocab = pack.vocab.char_count();
  s.frame_dim = pack.frame_dim;
  s.object_dim = pack.object_dim;
  s.answers = pack.answer_count;
  s.task = pack.task;
  return s;
}

Model Model::create(const Config& config, const ModelShape& shape) {
  config.validate();
  if (config.task != shape.task) {
    throw std::invalid_argument(std::string("config task ") + task_name(config.task) + " does not match pack task " +
                                task_name(shape.task));
  }
  Model m;
  m.config = config;
  m.shape = shape;
  Rng rng(config.seed);
  auto& p = m.params;

  QuestionDims qd;
  qd.word_dim = config.word_dim;
  qd.char_dim = config.d_c;
  qd.char_kernels = config.d_char;
  qd.char_width = config.char_width;
  qd.chars_per_word = config.chars_per_word;
  qd.hidden = config.hidden;
  m.question = QuestionEncoder::create(p, "question", shape.word_vocab, shape.char_vocab, qd, rng);
  m.question_proj = Linear::create(p, "question_proj", 2 * config.hidden, config.d_s, rng);

  const std::size_t dv = config.node_dim();
  m.object_proj = Linear::create(p, "object_proj", shape.object_dim, config.d_o, rng);
  m.spatial = Mlp::create(p, "spatial", 4, config.d_s_loc, config.d_s_loc, Activation::kRelu, rng);
  switch (config.relation) {
    case Relation::kGcn:
      m.gcn = GcnParams::create(p, "gcn", dv, config.attention_dim ? config.attention_dim : dv, config.gcn_layers, rng, config.shared_projection);
      break;
    case Relation::kFc:
      m.fc_relation = Mlp::create(p, "fc_relation", dv, dv, dv, Activation::kElu, rng);
      break;
    case Relation::kLstm:
      m.lstm_first = LstmCell::create(p, "lstm_relation.layer0", dv, dv, rng);
      m.lstm_second = LstmCell::create(p, "lstm_relation.layer1", dv, dv, rng);
      break;
    case Relation::kNone: break;
  }
  m.global_conv = Conv1d::create(p, "global_conv", shape.frame_dim, config.d_g, config.global_width, rng);
  m.fusion = Mlp::create(p, "fusion", dv + config.d_g, config.d_s, config.d_s, Activation::kElu, rng);
  m.visual_proj = Linear::create(p, "visual_proj", config.d_s, config.d_s, rng);

  const std::size_t blocks = config.task == TaskType::kMultipleChoice ? 5 : 3;
  if (config.task == TaskType::kMultipleChoice && shape.answers < 2) {
    throw std::invalid_argument("multiple-choice model needs at least two options");
  }
  if (config.shared_output_rnn || config.task != TaskType::kMultipleChoice) {
    m.out_rnn = BiLstm::create(p, "out_rnn", blocks * config.d_s, config.d_s / 2, rng);
  } else {
    for (std::size_t u = 0; u < shape.answers; ++u) {
      m.option_rnns.push_back(
          BiLstm::create(p, "out_rnn.option" + std::to_string(u), blocks * config.d_s, config.d_s / 2, rng));
    }
  }
  const std::size_t out = config.task == TaskType::kOpenEnded ? shape.answers : 1;
  if (config.task == TaskType::kOpenEnded && out < 2) throw std::invalid_argument("open-ended model needs C >= 2");
  m.head = Linear::create(p, "head", config.d_s, out, rng);

  if (config.init_scale != 1.0) {
    for (const auto& [name, t] : p.entries()) {
      Tensor handle = t;
      for (double& v : handle.mutable_data()) v *= config.init_scale;
    }
  }
  return m;
}

Tensor relation_forward(const Model& model, const Tensor& x0, std::vector<Tensor>* adjacency) {
  switch (model.config.relation) {
    case Relation::kGcn: {
      GcnOutput out = gcn_forward(x0, model.gcn);
      if (adjacency) *adjacency = out.adjacency;
      return out.regional;
    }
    case Relation::kFc: return add(mlp_forward(model.fc_relation, x0), x0);
    case Relation::kLstm: {
      Tensor h = lstm_sequence(model.lstm_first, x0, x0.dim(0), false);
      h = lstm_sequence(model.lstm_second, h, h.dim(0), false);
      return add(h, x0);
    }
    case Relation::kNone: return x0;
  }
  return x0;
}

namespace {

std::size_t objects_per_frame(const Model& model, const VideoRecord& video) {
  if (video.frames == 0) throw DimensionError("video " + video.id + " has no frames");
  const std::size_t per_frame = video.boxes.size() / (4 * video.frames);
  if (per_frame != model.config.objects) {
    throw DimensionError("video " + video.id + " has " + std::to_string(per_frame) +
                         " objects per frame, config K=" + std::to_string(model.config.objects));
  }
  return per_frame;
}

Tensor video_visual(const Model& model, const VideoRecord& video, std::vector<Tensor>* adjacency) {
  const Config& c = model.config;
  const std::size_t frames = video.frames;
  const std::size_t t = frames * c.objects;
  Tensor frame_features({frames, video.frame_features.size() / frames}, video.frame_features);
  Tensor global = global_context(frame_features, model.global_conv, c.objects);
  Tensor regional = c.use_objects ? relation_forward(model, video_nodes(model, video), adjacency)
                                  : Tensor::zeros({t, c.node_dim()});
  return linear_forward(model.visual_proj, fuse_visual(regional, global, model.fusion));
}

}  // namespace

Tensor video_nodes(const Model& model, const VideoRecord& video) {
  const Config& c = model.config;
  const std::size_t per_frame = objects_per_frame(model, video);
  const std::size_t frames = video.frames;
  Tensor raw({frames * per_frame, model.shape.object_dim}, video.object_features);
  Tensor projected = project_objects(raw, model.object_proj);
  std::vector<std::vector<ObjectRecord>> objects(frames);
  for (std::size_t n = 0; n < frames; ++n) {
    for (std::size_t k = 0; k < per_frame; ++k) {
      const double* b = video.boxes.data() + (n * per_frame + k) * 4;
      objects[n].push_back(ObjectRecord{{}, BBox{b[0], b[1], b[2], b[3], video.frame_width, video.frame_height}, n});
    }
  }
  LocationOptions options{c.use_spatial_loc, c.use_temporal_loc, c.normalize_boxes};
  return build_node_features(objects, projected, model.spatial, c.d_p, options).x;
}

std::vector<Tensor> video_adjacency(const Model& model, const VideoRecord& video) {
  if (model.config.relation != Relation::kGcn || !model.config.use_objects) {
    throw std::invalid_argument("adjacency is only defined for the gcn relation with objects enabled");
  }
  return gcn_forward(video_nodes(model, video), model.gcn).adjacency;
}

Forward forward(const Model& model, const Vocabulary& vocab, const VideoRecord& video, const QaItem& qa) {
  const Config& c = model.config;
  if (qa.task != c.task) throw std::invalid_argument("forward: QA task does not match model task");

  Forward out;
  out.visual = video_visual(model, video, &out.adjacency);

  auto encode = [&](const std::vector<std::int64_t>& ids) {
    TokenizedText text = tokenize_ids(ids, vocab, 0, c.chars_per_word, c.max_words);
    QuestionFeatures q = encode_text(text, model.question);
    q.features = linear_forward(model.question_proj, q.features);
    return q;
  };
  QuestionFeatures question = encode(qa.question);

  switch (c.task) {
    case TaskType::kMultipleChoice: {
      if (qa.options.size() != model.shape.answers) {
        throw DimensionError("forward: item has " + std::to_string(qa.options.size()) + " options, model expects " +
                             std::to_string(model.shape.answers));
      }
      std::vector<Tensor> pooled;
      for (std::size_t u = 0; u < qa.options.size(); ++u) {
        QuestionFeatures answer = encode(qa.options[u]);
        const BiLstm& rnn = model.option_rnns.empty() ? model.out_rnn : model.option_rnns[u];
        Interaction inter = vq_interact(out.visual, TextInput{question.features, question.mask}, rnn,
                                        TextInput{answer.features, answer.mask});
        pooled.push_back(inter.pooled);
      }
      out.scores = mc_score(pooled, model.head);
      out.loss = mc_loss(out.scores, static_cast<std::size_t>(qa.label));
      out.prediction = static_cast<double>(argmax(out.scores));
      break;
    }
    case TaskType::kOpenEnded: {
      Interaction inter = vq_interact(out.visual, TextInput{question.features, question.mask}, model.out_rnn);
      out.scores = open_ended_head(inter.pooled, model.head);
      out.loss = open_ended_loss(out.scores, static_cast<std::size_t>(qa.label));
      out.prediction = static_cast<double>(argmax(out.scores));
      break;
    }
    case TaskType::kCount: {
      Interaction inter = vq_interact(out.visual, TextInput{question.features, question.mask}, model.out_rnn);
      out.scores = count_head(inter.pooled, model.head);
      out.loss = count_loss(out.scores, static_cast<int>(qa.label));
      out.prediction = count_postprocess(out.scores.item());
      break;
    }
  }
  return out;
}

Forward forward(const Model& model, const FeaturePack& pack, std::size_t qa_index) {
  const QaItem& qa = pack.qa.at(qa_index);
  return forward(model, pack.vocab, pack.video(qa.video_id), qa);
}

void save_model(const Model& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  model.config.save(dir / "config.txt");
  std::ofstream shape(dir / "shape.txt");
  shape << "word_vocab=" << model.shape.word_vocab << "\nchar_vocab=" << model.shape.char_vocab
        << "\nframe_dim=" << model.shape.frame_dim << "\nobject_dim=" << model.shape.object_dim
        << "\nanswers=" << model.shape.answers << "\ntask=" << task_name(model.shape.task) << '\n';
  shape.close();
  save_checkpoint(model.params, dir);
}

Model load_model(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "config.txt")) {
    throw std::runtime_error("checkpoint " + dir.string() + " has no config.txt");
  }
  Config config = Config::load(dir / "config.txt");
  std::ifstream in(dir / "shape.txt");
  if (!in) throw std::runtime_error("checkpoint " + dir.string() + " has no shape.txt");
  ModelShape shape;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "word_vocab") shape.word_vocab = std::stoul(value);
    else if (key == "char_vocab") shape.char_vocab = std::stoul(value);
    else if (key == "frame_dim") shape.frame_dim = std::stoul(value);
    else if (key == "object_dim") shape.object_dim = std::stoul(value);
    else if (key == "answers") shape.answers = std::stoul(value);
    else if (key == "task") shape.task = parse_task(value);
  }
  Model model = Model::create(config, shape);
  load_checkpoint(model.params, dir);
  return model;
}

}  // namespace lgcn
