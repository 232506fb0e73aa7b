#include "lgcn/params.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "lgcn/binary_io.hpp"

namespace lgcn {

Tensor ParamStore::add(const std::string& name, Shape shape) {
  if (contains(name)) throw ContractError("duplicate parameter name: " + name);
  Tensor t = Tensor::zeros(std::move(shape), true);
  entries_.emplace_back(name, t);
  return t;
}

Tensor ParamStore::add_uniform(const std::string& name, Shape shape, double bound, Rng& rng) {
  Tensor t = add(name, std::move(shape));
  for (double& v : t.mutable_data()) v = rng.uniform(-bound, bound);
  return t;
}

const Tensor& ParamStore::get(const std::string& name) const {
  for (const auto& [key, t] : entries_) {
    if (key == name) return t;
  }
  throw ContractError("unknown parameter: " + name);
}

bool ParamStore::contains(const std::string& name) const {
  for (const auto& entry : entries_) {
    if (entry.first == name) return true;
  }
  return false;
}

void ParamStore::zero_grad() {
  for (auto& entry : entries_) entry.second.zero_grad();
}

std::size_t ParamStore::num_scalars() const {
  std::size_t n = 0;
  for (const auto& entry : entries_) n += entry.second.size();
  return n;
}

void Adam::update(std::size_t slot, Tensor& param, std::span<const double> grad) {
  if (slot >= m_.size()) {
    m_.resize(slot + 1);
    v_.resize(slot + 1);
  }
  auto& m = m_[slot];
  auto& v = v_[slot];
  if (m.empty()) {
    m.assign(param.size(), 0.0);
    v.assign(param.size(), 0.0);
  }
  if (m.size() != param.size() || (!grad.empty() && grad.size() != param.size())) {
    throw DimensionError("adam: gradient/moment shape does not match parameter " + shape_str(param.shape()));
  }
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  auto values = param.mutable_data();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double g = grad.empty() ? 0.0 : grad[i];
    m[i] = b1 * m[i] + (1.0 - b1) * g;
    v[i] = b2 * v[i] + (1.0 - b2) * g * g;
    const double m_hat = m[i] / c1;
    const double v_hat = v[i] / c2;
    values[i] -= options_.lr * m_hat / (std::sqrt(v_hat) + options_.epsilon);
  }
}

void Adam::step(const ParamStore& params) {
  ++t_;
  std::size_t slot = 0;
  for (const auto& [name, t] : params.entries()) {
    Tensor p = t;
    update(slot++, p, p.has_grad() ? p.grad() : std::span<const double>());
  }
}

void Adam::step(std::vector<Tensor>& params, const std::vector<std::vector<double>>& grads) {
  if (grads.size() != params.size()) throw DimensionError("adam: parameter and gradient counts differ");
  ++t_;
  for (std::size_t i = 0; i < params.size(); ++i) update(i, params[i], grads[i]);
}

void save_checkpoint(const ParamStore& params, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto manifest = dir / "params.txt";
  const auto blob = dir / "params.bin";
  const auto manifest_tmp = dir / "params.txt.tmp";
  const auto blob_tmp = dir / "params.bin.tmp";
  {
    std::ofstream text(manifest_tmp);
    std::ofstream bin(blob_tmp, std::ios::binary);
    if (!text || !bin) throw std::runtime_error("cannot write checkpoint in " + dir.string());
    for (const auto& [name, t] : params.entries()) {
      text << name;
      for (std::size_t extent : t.shape()) text << ' ' << extent;
      text << '\n';
      binary::write_f64s(bin, t.data());
    }
    if (!text || !bin) throw std::runtime_error("checkpoint write failed in " + dir.string());
  }
  std::filesystem::rename(blob_tmp, blob);
  std::filesystem::rename(manifest_tmp, manifest);
}

void load_checkpoint(ParamStore& params, const std::filesystem::path& dir) {
  std::ifstream text(dir / "params.txt");
  std::ifstream bin(dir / "params.bin", std::ios::binary);
  if (!text || !bin) throw std::runtime_error("checkpoint not found in " + dir.string());
  std::string line;
  std::size_t index = 0;
  while (std::getline(text, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string name;
    fields >> name;
    Shape shape;
    std::size_t extent = 0;
    while (fields >> extent) shape.push_back(extent);
    if (index >= params.size()) throw std::runtime_error("checkpoint has extra parameter " + name);
    const auto& [expected, tensor] = params.entries()[index++];
    if (name != expected || shape != tensor.shape()) {
      throw DimensionError("checkpoint parameter " + name + shape_str(shape) + " does not match " + expected +
                           shape_str(tensor.shape()));
    }
    Tensor t = tensor;
    for (double& v : t.mutable_data()) {
      if (!binary::read_f64(bin, v)) throw std::runtime_error("checkpoint blob truncated at " + name);
    }
  }
  if (index != params.size()) throw std::runtime_error("checkpoint is missing parameters");
}

}  // namespace lgcn
