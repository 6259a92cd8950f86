#include "picrl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "picrl/errors.hpp"

namespace picrl::nn {

Mlp::Mlp(std::vector<std::size_t> sizes, std::uint64_t seed) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw ConfigError("Mlp needs at least an input and an output layer");
  layout();
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const std::size_t in = sizes_[l], out = sizes_[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> unif(-bound, bound);
    double* w = params_.data() + offsets_[l];
    for (std::size_t i = 0; i < in * out; ++i) w[i] = unif(rng);
    std::fill(w + in * out, w + in * out + out, 0.0);
  }
}

void Mlp::layout() {
  offsets_.clear();
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(total);
    total += sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
  }
  params_.assign(total, 0.0);
}

void Mlp::forward(std::span<const double> x, Tape& tape) const {
  if (x.size() != input_size()) throw ShapeError("Mlp input has the wrong width");
  const std::size_t layers = sizes_.size();
  tape.activations.resize(layers);
  tape.activations[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l + 1 < layers; ++l) {
    const std::size_t in = sizes_[l], out = sizes_[l + 1];
    const double* w = params_.data() + offsets_[l];
    const double* b = w + in * out;
    const auto& src = tape.activations[l];
    auto& dst = tape.activations[l + 1];
    dst.resize(out);
    const bool hidden = l + 2 < layers;
    for (std::size_t o = 0; o < out; ++o) {
      const double* row = w + o * in;
      double acc = b[o];
      for (std::size_t i = 0; i < in; ++i) acc += row[i] * src[i];
      dst[o] = hidden ? std::tanh(acc) : acc;
    }
  }
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
  Tape tape;
  forward(x, tape);
  return tape.activations.back();
}

void Mlp::backward(const Tape& tape, std::span<const double> grad_out, std::span<double> grad) const {
  if (grad.size() != params_.size()) throw ShapeError("gradient buffer has the wrong size");
  if (grad_out.size() != output_size()) throw ShapeError("output gradient has the wrong width");
  std::vector<double> delta(grad_out.begin(), grad_out.end());
  std::vector<double> prev;
  for (std::size_t l = sizes_.size() - 1; l-- > 0;) {
    const std::size_t in = sizes_[l], out = sizes_[l + 1];
    const double* w = params_.data() + offsets_[l];
    double* gw = grad.data() + offsets_[l];
    double* gb = gw + in * out;
    const auto& src = tape.activations[l];
    for (std::size_t o = 0; o < out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      double* grow = gw + o * in;
      for (std::size_t i = 0; i < in; ++i) grow[i] += d * src[i];
      gb[o] += d;
    }
    if (l == 0) break;
    prev.assign(in, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) prev[i] += row[i] * d;
    }
    for (std::size_t i = 0; i < in; ++i) prev[i] *= 1.0 - src[i] * src[i];
    delta.swap(prev);
  }
}

nlohmann::json Mlp::to_json() const {
  return nlohmann::json{{"sizes", sizes_}, {"parameters", params_}};
}

Mlp Mlp::from_json(const nlohmann::json& j) {
  Mlp net;
  net.sizes_ = j.at("sizes").get<std::vector<std::size_t>>();
  if (net.sizes_.size() < 2) throw ConfigError("Mlp checkpoint: bad layer sizes");
  net.layout();
  auto params = j.at("parameters").get<std::vector<double>>();
  if (params.size() != net.params_.size()) throw ConfigError("Mlp checkpoint: parameter count mismatch");
  net.params_ = std::move(params);
  return net;
}

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) throw ShapeError("Adam: size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

double clip_grad_norm(std::span<double> grad, double max_norm) {
  double ss = 0.0;
  for (double g : grad) ss += g * g;
  const double norm = std::sqrt(ss);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (double& g : grad) g *= s;
  }
  return norm;
}

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace picrl::nn
