#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "picrl/nn.hpp"
#include "picrl/stats.hpp"
#include "picrl/workload.hpp"

namespace picrl::predictor {

struct PredictorConfig {
  std::size_t window_len = 32;
  std::size_t hidden_width = 64;
  double learning_rate = 1e-3;
  std::size_t epochs = 200;
  std::uint64_t seed = 0;
  std::size_t context_width = 0;
  std::size_t batch_size = 64;
  double grad_clip = 5.0;

  void validate() const;
};

void to_json(nlohmann::json& j, const PredictorConfig& c);
void from_json(const nlohmann::json& j, PredictorConfig& c);

// Per-epoch curves plus the sequence of best-validation checkpoints.
struct TrainingHistory {
  std::vector<double> train_nll;
  std::vector<double> val_nll;
  std::vector<double> val_mae;
  std::vector<std::size_t> checkpoint_epochs;
  std::vector<double> checkpoint_val_nll;
  std::size_t best_epoch = 0;
  double best_val_nll = 0.0;
  double best_val_mae = 0.0;
};

// Anything that maps an observation window (plus optional context) to a Gaussian belief.
class Forecaster {
 public:
  virtual ~Forecaster() = default;
  virtual std::size_t window_len() const = 0;
  virtual stats::GaussianBelief predict(std::span<const double> window,
                                        std::span<const double> context = {}) const = 0;
};

// Ignores its input; used by the theory suites where the forecast is held fixed.
class FixedForecaster final : public Forecaster {
 public:
  FixedForecaster(double mean, double stddev, std::size_t window_len = 1)
      : belief_(stats::GaussianBelief::make(mean, stddev)), window_len_(window_len) {}
  std::size_t window_len() const override { return window_len_; }
  stats::GaussianBelief predict(std::span<const double>, std::span<const double>) const override { return belief_; }

 private:
  stats::GaussianBelief belief_;
  std::size_t window_len_;
};

// Windowed feed-forward forecaster with a Gaussian head:
// sigma = softplus(s_raw) + sigma_floor.
class PredictorModel final : public Forecaster {
 public:
  PredictorModel(PredictorConfig config, nn::Mlp network);

  std::size_t window_len() const override { return config_.window_len; }
  // Throws ShapeError on a window or context of the wrong width. The mean is clipped to [0, 1].
  stats::GaussianBelief predict(std::span<const double> window,
                                std::span<const double> context = {}) const override;

  const PredictorConfig& config() const { return config_; }
  const nn::Mlp& network() const { return net_; }
  nn::Mlp& network() { return net_; }

  TrainingHistory history;

  nlohmann::json to_json() const;
  static PredictorModel from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static PredictorModel load(const std::filesystem::path& path);

 private:
  PredictorConfig config_;
  nn::Mlp net_;
};

// log sigma + 0.5 * ((d - mu) / sigma)^2
double nll_loss(const stats::GaussianBelief& pred, double d);

// Network input for predicting the value right after `window`.
std::vector<double> make_input(std::span<const double> window, std::span<const double> context);

// Per-sample NLL of the unclipped head; accumulates d(loss)/d(params) into grad.
double sample_loss_and_grad(const nn::Mlp& net, std::span<const double> input, double target,
                            std::span<double> grad, nn::Mlp::Tape& tape);

// Trains on sliding windows of `train` and selects the epoch with the best NLL on
// `val` (whose windows may reach back into the tail of `train`).
PredictorModel train_predictor(const workload::Segment& train, const workload::Segment& val,
                               const PredictorConfig& config);

}  // namespace picrl::predictor
