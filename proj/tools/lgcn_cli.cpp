#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "lgcn/commands.hpp"
#include "lgcn/synthetic.hpp"

namespace fs = std::filesystem;
using namespace lgcn;

namespace {

// A data argument is either a pack directory or a directory holding
// train/ val/ test/ packs as written by gen-synthetic.
struct DataSplits {
  FeaturePack train;
  std::optional<FeaturePack> val;
  std::optional<FeaturePack> test;
};

bool is_pack(const fs::path& dir) { return fs::exists(dir / "manifest.txt"); }

DataSplits load_splits(const fs::path& dir) {
  DataSplits out;
  if (is_pack(dir)) {
    out.train = read_pack(dir);
    return out;
  }
  if (!is_pack(dir / "train")) throw std::runtime_error("no feature pack in " + dir.string());
  out.train = read_pack(dir / "train");
  if (is_pack(dir / "val")) out.val = read_pack(dir / "val");
  if (is_pack(dir / "test")) out.test = read_pack(dir / "test");
  return out;
}

FeaturePack load_eval_pack(const fs::path& dir, const std::string& split) {
  if (is_pack(dir)) return read_pack(dir);
  if (!is_pack(dir / split)) throw std::runtime_error("no '" + split + "' pack in " + dir.string());
  return read_pack(dir / split);
}

Config config_for(const std::string& path, const FeaturePack& pack) {
  Config config = path.empty() ? Config{} : Config::load(path);
  if (path.empty()) {
    config.task = pack.task;
    config.objects = pack.objects_per_frame;
  }
  return config;
}

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

const char* error_kind(const std::exception& e) {
  if (dynamic_cast<const DimensionError*>(&e)) return "dimension";
  if (dynamic_cast<const ContractError*>(&e)) return "contract";
  if (dynamic_cast<const NonFiniteLossError*>(&e)) return "non_finite_loss";
  if (dynamic_cast<const OracleError*>(&e)) return "oracle";
  if (dynamic_cast<const FormatError*>(&e)) return "format";
  if (dynamic_cast<const std::out_of_range*>(&e)) return "not_found";
  if (dynamic_cast<const std::invalid_argument*>(&e)) return "invalid_argument";
  return "runtime";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Location-aware graph convolutional network for video QA"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_dir, checkpoint, spec_path, video_id, variants = "full,loc_s,baseline",
                                                                            split = "test";
  std::size_t layer = 1, max_steps = 0;
  double tolerance = 1e-4, eps = 1e-5;
  bool quiet = false;

  auto* train_cmd = app.add_subcommand("train", "train a model on a feature pack");
  train_cmd->add_option("--config", config_path, "key=value config file");
  train_cmd->add_option("--data", data_dir, "pack directory or train/val split directory")->required();
  train_cmd->add_option("--out", out_dir, "checkpoint directory")->required();
  train_cmd->add_option("--max-steps", max_steps, "stop after this many optimizer steps");
  train_cmd->add_flag("--quiet", quiet, "no per-epoch progress");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", checkpoint)->required();
  eval_cmd->add_option("--data", data_dir)->required();
  eval_cmd->add_option("--split", split, "split used when --data holds several packs");

  auto* gen_cmd = app.add_subcommand("gen-synthetic", "write train/val/test synthetic packs");
  gen_cmd->add_option("--spec", spec_path, "synthetic spec (key=value)")->required();
  gen_cmd->add_option("--out", out_dir)->required();

  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  grad_cmd->add_option("--config", config_path, "config for the pipeline checks (tiny by default)");
  grad_cmd->add_option("--tolerance", tolerance);
  grad_cmd->add_option("--eps", eps);

  auto* dump_cmd = app.add_subcommand("dump-adjacency", "write one learned adjacency matrix as CSV and PGM");
  dump_cmd->add_option("--checkpoint", checkpoint)->required();
  dump_cmd->add_option("--data", data_dir)->required();
  dump_cmd->add_option("--split", split);
  dump_cmd->add_option("--video", video_id)->required();
  dump_cmd->add_option("--layer", layer, "1-based GCN layer")->required();
  dump_cmd->add_option("--out", out_dir, "output prefix (default adjacency_<video>_<layer>)");

  auto* ablate_cmd = app.add_subcommand("ablate", "train and compare model variants");
  ablate_cmd->add_option("--variants", variants, "comma-separated variant names");
  ablate_cmd->add_option("--config", config_path);
  ablate_cmd->add_option("--data", data_dir)->required();
  ablate_cmd->add_option("--out", out_dir, "write the table and per-variant reports here");
  ablate_cmd->add_option("--max-steps", max_steps);
  ablate_cmd->add_flag("--quiet", quiet);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: usage: %s\n", one_line(e.what()).c_str());
    return 2;
  }

  try {
    if (*train_cmd) {
      DataSplits data = load_splits(data_dir);
      Config config = config_for(config_path, data.train);
      Model model = build_model(config, data.train);
      TrainOptions options;
      options.verbose = !quiet;
      options.max_steps = max_steps;
      RunReport report = train(model, data.train, data.val ? &*data.val : nullptr, options);
      save_model(model, out_dir);
      save_report(report, fs::path(out_dir) / "report.json");
      std::printf("%s\n", report.to_json().c_str());
    } else if (*eval_cmd) {
      Model model = load_model(checkpoint);
      FeaturePack pack = load_eval_pack(data_dir, split);
      Evaluation ev = evaluate(model, pack);
      nlohmann::json j;
      j["task"] = task_name(pack.task);
      j["metric"] = pack.task == TaskType::kCount ? "mse" : "accuracy";
      j["value"] = ev.metric;
      j["samples"] = pack.qa.size();
      std::printf("%s\n", j.dump().c_str());
    } else if (*gen_cmd) {
      SyntheticSpec spec = SyntheticSpec::load(spec_path);
      fs::create_directories(out_dir);
      write_pack(generate_synthetic(spec, spec.train_count, 0), fs::path(out_dir) / "train");
      write_pack(generate_synthetic(spec, spec.val_count, 1), fs::path(out_dir) / "val");
      write_pack(generate_synthetic(spec, spec.val_count, 2), fs::path(out_dir) / "test");
      spec.save(fs::path(out_dir) / "spec.txt");
      std::printf("wrote %s/{train,val,test}\n", out_dir.c_str());
    } else if (*grad_cmd) {
      Config config = config_path.empty() ? tiny_config() : Config::load(config_path);
      GradCheckReport report = gradcheck_cmd(config, tolerance, eps);
      for (const auto& e : report.entries) {
        std::printf("%-48s %.3e %s\n", e.name.c_str(), e.max_rel_error, e.passed ? "ok" : "FAIL");
      }
      if (!report.passed()) {
        std::fprintf(stderr, "error: gradcheck: failed %s\n", report.failures().c_str());
        return 1;
      }
      std::printf("all %zu checks passed (tolerance %g)\n", report.entries.size(), tolerance);
    } else if (*dump_cmd) {
      Model model = load_model(checkpoint);
      FeaturePack pack = load_eval_pack(data_dir, split);
      const fs::path prefix = out_dir.empty() ? fs::path("adjacency_" + video_id + "_" + std::to_string(layer))
                                              : fs::path(out_dir);
      AdjacencyDump dump = dump_adjacency(model, pack, video_id, layer, prefix);
      std::printf("%s\n%s\n", dump.csv.c_str(), dump.pgm.c_str());
    } else if (*ablate_cmd) {
      DataSplits data = load_splits(data_dir);
      Config config = config_for(config_path, data.train);
      const FeaturePack& test = data.test ? *data.test : data.val ? *data.val : data.train;
      TrainOptions options;
      options.verbose = !quiet;
      options.max_steps = max_steps;
      auto rows = ablate(config, split_csv(variants), data.train, data.val ? &*data.val : nullptr, test, options);
      const std::string table = format_ablation(rows, data.train.task);
      std::printf("%s", table.c_str());
      if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream(fs::path(out_dir) / "ablation.txt") << table;
        for (const auto& row : rows) save_report(row.report, fs::path(out_dir) / (row.variant + ".json"));
      }
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s: %s\n", error_kind(e), one_line(e.what()).c_str());
    return 1;
  }
  return 0;
}
