#include "lgcn/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>

#include "json.hpp"
#include "lgcn/ops.hpp"

namespace lgcn {

std::string RunReport::to_json() const {
  nlohmann::json j;
  j["task"] = task_name(task);
  j["seed"] = seed;
  j["config_hash"] = config_hash;
  j["epoch_loss"] = epoch_loss;
  j["eval_metric"] = eval_metric;
  j["step_loss"] = step_loss;
  j["best_metric"] = best_metric;
  j["best_epoch"] = best_epoch;
  j["wall_seconds"] = wall_seconds;
  return j.dump(2);
}

void save_report(const RunReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report " + path.string());
  out << report.to_json() << '\n';
}

Evaluation evaluate(const Model& model, const FeaturePack& pack) {
  if (pack.task != model.config.task) {
    throw std::invalid_argument(std::string("evaluate: pack task ") + task_name(pack.task) +
                                " does not match checkpoint task " + task_name(model.config.task));
  }
  Evaluation ev;
  ev.higher_is_better = pack.task != TaskType::kCount;
  double total = 0.0;
  for (std::size_t i = 0; i < pack.qa.size(); ++i) {
    Forward f = forward(model, pack, i);
    ev.predictions.push_back(f.prediction);
    const double label = static_cast<double>(pack.qa[i].label);
    if (pack.task == TaskType::kCount) {
      total += (f.prediction - label) * (f.prediction - label);
    } else {
      total += f.prediction == label ? 1.0 : 0.0;
    }
  }
  ev.metric = pack.qa.empty() ? 0.0 : total / static_cast<double>(pack.qa.size());
  return ev;
}

Model build_model(const Config& config, const FeaturePack& pack) {
  Model model = Model::create(config, ModelShape::of(pack));
  if (!config.embeddings.empty()) {
    load_pretrained_embeddings(model.question.words, pack.vocab, config.embeddings);
  }
  return model;
}

RunReport train(Model& model, const FeaturePack& train_pack, const FeaturePack* val_pack,
                const TrainOptions& options) {
  const Config& c = model.config;
  if (train_pack.task != c.task) {
    throw std::invalid_argument(std::string("train: pack task ") + task_name(train_pack.task) +
                                " does not match config task " + task_name(c.task));
  }
  if (val_pack && val_pack->task != c.task) throw std::invalid_argument("train: validation pack task mismatch");
  if (ModelShape::of(train_pack) != model.shape) {
    throw std::invalid_argument("train: pack extents do not match the model");
  }

  const auto start = std::chrono::steady_clock::now();
  RunReport report;
  report.seed = c.seed;
  report.config_hash = c.hash();
  report.task = c.task;

  Adam adam({c.lr, c.beta1, c.beta2, c.epsilon});
  Rng rng(c.seed ^ 0x5eed5eed5eed5eedULL);
  std::vector<std::size_t> order(train_pack.qa.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch = c.effective_batch();
  const bool higher_better = c.task != TaskType::kCount;

  std::vector<std::vector<double>> best;
  bool have_best = false;
  std::size_t steps = 0;
  bool stop = false;

  for (std::size_t epoch = 0; epoch < c.epochs && !stop; ++epoch) {
    rng.shuffle(order);
    double epoch_total = 0.0;
    std::size_t seen = 0;
    for (std::size_t begin = 0; begin < order.size() && !stop; begin += batch) {
      const std::size_t end = std::min(order.size(), begin + batch);
      const double weight = 1.0 / static_cast<double>(end - begin);
      model.params.zero_grad();
      double batch_total = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        Tape tape;
        TapeScope scope(tape);
        Forward f = forward(model, train_pack, order[i]);
        const double value = f.loss.item();
        if (!std::isfinite(value)) {
          throw NonFiniteLossError("non-finite loss " + std::to_string(value) + " at epoch " + std::to_string(epoch) +
                                   " step " + std::to_string(steps) + " on item " + std::to_string(order[i]));
        }
        batch_total += value;
        tape.backward(scale(f.loss, weight));
      }
      adam.step(model.params);
      ++steps;
      report.step_loss.push_back(batch_total * weight);
      epoch_total += batch_total;
      seen += end - begin;
      if (options.max_steps && steps >= options.max_steps) stop = true;
    }
    report.epoch_loss.push_back(seen ? epoch_total / static_cast<double>(seen) : 0.0);

    double metric = std::nan("");
    if (val_pack && !val_pack->qa.empty()) {
      metric = evaluate(model, *val_pack).metric;
      report.eval_metric.push_back(metric);
      const bool better = !have_best || (higher_better ? metric > report.best_metric : metric < report.best_metric);
      if (better) {
        report.best_metric = metric;
        report.best_epoch = epoch;
        have_best = true;
        if (options.keep_best) {
          best.clear();
          for (const auto& [name, t] : model.params.entries()) best.emplace_back(t.data().begin(), t.data().end());
        }
      }
    }
    if (options.verbose) {
      std::fprintf(stderr, "epoch %zu loss %.6f metric %.4f\n", epoch, report.epoch_loss.back(), metric);
    }
    if (options.on_epoch) options.on_epoch(epoch, report.epoch_loss.back(), metric);
    if (options.target_metric && !std::isnan(metric) &&
        (higher_better ? metric >= *options.target_metric : metric <= *options.target_metric)) {
      stop = true;
    }
  }

  if (options.keep_best && have_best) {
    std::size_t i = 0;
    for (const auto& [name, t] : model.params.entries()) {
      Tensor handle = t;
      std::copy(best[i].begin(), best[i].end(), handle.mutable_data().begin());
      ++i;
    }
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace lgcn
