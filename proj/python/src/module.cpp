#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "lgcn/commands.hpp"
#include "lgcn/synthetic.hpp"

namespace py = pybind11;
using namespace lgcn;

namespace {

py::array_t<double> to_numpy(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<double> out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

Tensor from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

py::dict report_dict(const RunReport& r) {
  py::dict d;
  d["epoch_loss"] = r.epoch_loss;
  d["eval_metric"] = r.eval_metric;
  d["step_loss"] = r.step_loss;
  d["best_metric"] = r.best_metric;
  d["best_epoch"] = r.best_epoch;
  d["wall_seconds"] = r.wall_seconds;
  d["seed"] = r.seed;
  d["config_hash"] = r.config_hash;
  d["task"] = task_name(r.task);
  return d;
}

}  // namespace

PYBIND11_MODULE(_lgcn, m) {
  m.doc() = "Location-aware graph convolutional networks for video question answering";

  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<OracleError>(m, "OracleError", PyExc_RuntimeError);

  py::class_<Config>(m, "Config")
      .def(py::init<>())
      .def_static("parse", &Config::parse)
      .def_static("load", [](const std::string& p) { return Config::load(p); })
      .def("save", [](const Config& c, const std::string& p) { c.save(p); })
      .def("set", &Config::set)
      .def("validate", &Config::validate)
      .def("hash", &Config::hash)
      .def("__str__", &Config::to_string)
      .def("__eq__", [](const Config& a, const Config& b) { return a == b; })
      .def_readwrite("d_o", &Config::d_o)
      .def_readwrite("d_s", &Config::d_s)
      .def_readwrite("d_p", &Config::d_p)
      .def_readwrite("objects", &Config::objects)
      .def_readwrite("gcn_layers", &Config::gcn_layers)
      .def_readwrite("lr", &Config::lr)
      .def_readwrite("epochs", &Config::epochs)
      .def_readwrite("batch_size", &Config::batch_size)
      .def_readwrite("seed", &Config::seed)
      .def_property(
          "task", [](const Config& c) { return std::string(task_name(c.task)); },
          [](Config& c, const std::string& t) { c.task = parse_task(t); });
  m.def("small_config", &small_config);
  m.def("tiny_config", &tiny_config);
  m.def("apply_variant", &apply_variant, py::arg("config"), py::arg("variant"));

  py::class_<SyntheticSpec>(m, "SyntheticSpec")
      .def(py::init<>())
      .def_readwrite("seed", &SyntheticSpec::seed)
      .def_readwrite("frames", &SyntheticSpec::frames)
      .def_readwrite("objects", &SyntheticSpec::objects)
      .def_readwrite("classes", &SyntheticSpec::classes)
      .def_readwrite("feature_dim", &SyntheticSpec::feature_dim)
      .def_readwrite("noise", &SyntheticSpec::noise)
      .def_readwrite("threshold", &SyntheticSpec::threshold)
      .def_readwrite("options", &SyntheticSpec::options)
      .def_readwrite("frame_width", &SyntheticSpec::frame_width)
      .def_readwrite("frame_height", &SyntheticSpec::frame_height)
      .def_property(
          "task", [](const SyntheticSpec& s) { return std::string(synthetic_task_name(s.task)); },
          [](SyntheticSpec& s, const std::string& t) { s.task = parse_synthetic_task(t); })
      .def_static("load", [](const std::string& p) { return SyntheticSpec::load(p); });

  py::class_<FeaturePack>(m, "FeaturePack")
      .def_readonly("dataset", &FeaturePack::dataset)
      .def_readonly("frames", &FeaturePack::frames)
      .def_readonly("objects_per_frame", &FeaturePack::objects_per_frame)
      .def_readonly("answer_count", &FeaturePack::answer_count)
      .def_property_readonly("task", [](const FeaturePack& p) { return std::string(task_name(p.task)); })
      .def_property_readonly("labels",
                             [](const FeaturePack& p) {
                               std::vector<std::int64_t> out;
                               for (const auto& q : p.qa) out.push_back(q.label);
                               return out;
                             })
      .def_property_readonly("video_ids",
                             [](const FeaturePack& p) {
                               std::vector<std::string> out;
                               for (const auto& v : p.videos) out.push_back(v.id);
                               return out;
                             })
      .def("question_text",
           [](const FeaturePack& p, std::size_t i) {
             std::string s;
             for (auto id : p.qa.at(i).question) s += (s.empty() ? "" : " ") + p.vocab.token(id);
             return s;
           })
      .def("__len__", [](const FeaturePack& p) { return p.qa.size(); })
      .def("__eq__", [](const FeaturePack& a, const FeaturePack& b) { return a == b; });
  m.def("generate_synthetic", &generate_synthetic, py::arg("spec"), py::arg("count"), py::arg("stream") = 0);
  m.def("write_pack", &write_pack, py::arg("pack"), py::arg("path"));
  m.def("read_pack", &read_pack, py::arg("path"));
  m.def("tiny_pack", [](const std::string& task, std::uint64_t seed) { return tiny_pack(parse_task(task), seed); },
        py::arg("task"), py::arg("seed") = 0);

  py::class_<Model>(m, "Model")
      .def_readonly("config", &Model::config)
      .def_property_readonly("num_parameters", [](const Model& m) { return m.params.num_scalars(); })
      .def("parameter_names", [](const Model& m) {
        std::vector<std::string> out;
        for (const auto& [name, t] : m.params.entries()) out.push_back(name);
        return out;
      });
  m.def("build_model", &build_model, py::arg("config"), py::arg("pack"));
  m.def("save_model", &save_model, py::arg("model"), py::arg("path"));
  m.def("load_model", &load_model, py::arg("path"));
  m.def(
      "train",
      [](Model& model, const FeaturePack& train_pack, const FeaturePack* val, std::size_t max_steps, bool verbose) {
        TrainOptions o;
        o.max_steps = max_steps;
        o.verbose = verbose;
        py::gil_scoped_release release;
        RunReport r = train(model, train_pack, val, o);
        py::gil_scoped_acquire acquire;
        return report_dict(r);
      },
      py::arg("model"), py::arg("train_pack"), py::arg("val_pack") = nullptr, py::arg("max_steps") = 0,
      py::arg("verbose") = false);
  m.def(
      "evaluate", [](const Model& model, const FeaturePack& pack) { return evaluate(model, pack).metric; },
      py::arg("model"), py::arg("pack"));
  m.def(
      "scores",
      [](const Model& model, const FeaturePack& pack, std::size_t i) { return to_numpy(forward(model, pack, i).scores); },
      py::arg("model"), py::arg("pack"), py::arg("index"));
  m.def(
      "adjacency",
      [](const Model& model, const FeaturePack& pack, const std::string& video, std::size_t layer) {
        return to_numpy(video_adjacency(model, pack.video(video)).at(layer - 1));
      },
      py::arg("model"), py::arg("pack"), py::arg("video"), py::arg("layer"));
  m.def(
      "dump_adjacency",
      [](const Model& model, const FeaturePack& pack, const std::string& video, std::size_t layer,
         const std::string& prefix) {
        AdjacencyDump d = dump_adjacency(model, pack, video, layer, prefix);
        return py::make_tuple(d.csv.string(), d.pgm.string());
      },
      py::arg("model"), py::arg("pack"), py::arg("video"), py::arg("layer"), py::arg("prefix"));

  m.def(
      "gradcheck",
      [](const Config* config, double tolerance) {
        GradCheckReport r = gradcheck_cmd(config ? *config : tiny_config(), tolerance);
        std::vector<std::tuple<std::string, double, bool>> out;
        for (const auto& e : r.entries) out.emplace_back(e.name, e.max_rel_error, e.passed);
        return out;
      },
      py::arg("config") = nullptr, py::arg("tolerance") = 1e-4);

  m.def(
      "encode_temporal", [](std::size_t frame, std::size_t dim) { return to_numpy(encode_temporal(frame, dim)); },
      py::arg("frame"), py::arg("dim"));
  m.def(
      "compute_adjacency",
      [](py::array_t<double> x, py::array_t<double> w1, py::array_t<double> w2) {
        return to_numpy(compute_adjacency(from_numpy(x), from_numpy(w1), from_numpy(w2)));
      },
      py::arg("x"), py::arg("w1"), py::arg("w2"));
  m.def("count_postprocess", &count_postprocess, py::arg("raw"));
}
