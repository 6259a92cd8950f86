#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace picrl::nn {

// Dense feed-forward network: tanh hidden layers, linear output. Parameters live in
// one flat vector laid out per layer as row-major W (out x in) followed by b (out).
class Mlp {
 public:
  struct Tape {
    std::vector<std::vector<double>> activations;  // [0] = input, back() = output
  };

  Mlp() = default;
  Mlp(std::vector<std::size_t> sizes, std::uint64_t seed);

  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }
  std::size_t parameter_count() const { return params_.size(); }
  const std::vector<std::size_t>& sizes() const { return sizes_; }

  std::vector<double>& parameters() { return params_; }
  const std::vector<double>& parameters() const { return params_; }

  void forward(std::span<const double> x, Tape& tape) const;
  std::vector<double> forward(std::span<const double> x) const;

  // Accumulates d(loss)/d(params) into grad given d(loss)/d(output) for the pass in tape.
  void backward(const Tape& tape, std::span<const double> grad_out, std::span<double> grad) const;

  nlohmann::json to_json() const;
  static Mlp from_json(const nlohmann::json& j);

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;  // start of each layer's W block
  std::vector<double> params_;

  void layout();
};

class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(std::span<double> params, std::span<const double> grad);
  double learning_rate() const { return lr_; }

 private:
  double lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  std::vector<double> m_, v_;
  std::uint64_t t_ = 0;
};

// Rescales grad in place so its L2 norm is at most max_norm; returns the original norm.
double clip_grad_norm(std::span<double> grad, double max_norm);

double softplus(double x);
double sigmoid(double x);

}  // namespace picrl::nn
