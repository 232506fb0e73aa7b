#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "lgcn/rng.hpp"
#include "lgcn/tensor.hpp"

namespace lgcn {

/// Trainable tensors keyed by module path, kept in registration order.
class ParamStore {
 public:
  /// Registers a zero-initialized parameter; names must be unique.
  Tensor add(const std::string& name, Shape shape);
  /// Registers a parameter drawn uniformly from [-bound, bound].
  Tensor add_uniform(const std::string& name, Shape shape, double bound, Rng& rng);

  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;
  std::size_t size() const { return entries_.size(); }
  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }

  void zero_grad();
  std::size_t num_scalars() const;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

/// Bias-corrected Adam.
class Adam {
 public:
  struct Options {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
  };

  explicit Adam(Options options) : options_(options) {}

  /// Applies one update to every parameter using its gradient buffer
  /// (missing buffers count as zero).
  void step(const ParamStore& params);
  /// Updates a single parameter list against explicit gradients.
  void step(std::vector<Tensor>& params, const std::vector<std::vector<double>>& grads);

  long long steps() const { return t_; }
  const Options& options() const { return options_; }
  const std::vector<double>& first_moment(std::size_t i) const { return m_.at(i); }
  const std::vector<double>& second_moment(std::size_t i) const { return v_.at(i); }

 private:
  void update(std::size_t slot, Tensor& param, std::span<const double> grad);

  Options options_;
  long long t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

/// Writes `<dir>/params.txt` (one "name d0 d1 ..." line per parameter) and
/// `<dir>/params.bin` (little-endian doubles in manifest order). Files are
/// written to temporaries and renamed into place.
void save_checkpoint(const ParamStore& params, const std::filesystem::path& dir);
/// Loads values into an already-shaped store; names and shapes must match.
void load_checkpoint(ParamStore& params, const std::filesystem::path& dir);

}  // namespace lgcn
