#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "picrl/env.hpp"
#include "picrl/loop.hpp"
#include "picrl/predictor.hpp"
#include "picrl/stats.hpp"
#include "picrl/workload.hpp"

namespace picrl::baselines {

// A reference policy driven only by feedback and, optionally, the forecast.
class Baseline {
 public:
  virtual ~Baseline() = default;
  virtual std::string name() const = 0;
  // Fully observed prefix preceding the episode.
  virtual void reset(const workload::Segment& history, const predictor::Forecaster& forecaster) = 0;
  virtual double act(const stats::GaussianBelief& forecast) = 0;
  virtual void observe(double a, const env::Feedback& feedback, const stats::GaussianBelief& forecast) = 0;
};

// Learner whose base level A chases the empirical mean of what it observes:
//   A <- A + gamma * ((1 - rho) * mean(history) + rho * mean(recent uncensored y) - A).
// Uncensored observations under A are draws of D given D <= A, so rho > 0 biases the
// target below E[D].
struct NaiveConfig {
  double rho = 0.5;
  double gamma = 0.05;
  std::size_t recent = 200;
  double initial_level = -1.0;  // < 0: start at the history mean
};

class NaiveMixtureLearner final : public Baseline {
 public:
  explicit NaiveMixtureLearner(NaiveConfig config = {});
  std::string name() const override { return "naive"; }
  void reset(const workload::Segment& history, const predictor::Forecaster& forecaster) override;
  void reset(double history_mean);
  double act(const stats::GaussianBelief& forecast) override;
  void observe(double a, const env::Feedback& feedback, const stats::GaussianBelief& forecast) override;
  void step(const env::Feedback& feedback);

  double level() const { return level_; }
  double target() const;

 private:
  NaiveConfig config_;
  double level_ = 0.5;
  double history_mean_ = 0.5;
  std::deque<double> recent_;
  double recent_sum_ = 0.0;
};

// a = mu + upper q-quantile of residuals y - mu, collected on uncensored steps only.
struct ConformalConfig {
  double q = 2.0 / 3.0;  // defaults to the cost-optimal level c_under / (c_under + c_over)
  std::size_t capacity = 200;
  std::size_t warm = 20;
};

class ConformalCalibrator final : public Baseline {
 public:
  explicit ConformalCalibrator(ConformalConfig config = {});
  std::string name() const override { return "conformal"; }
  void reset(const workload::Segment& history, const predictor::Forecaster& forecaster) override;
  double act(const stats::GaussianBelief& forecast) override;
  void observe(double a, const env::Feedback& feedback, const stats::GaussianBelief& forecast) override;

  void add_residual(double r);
  // Offset added to mu; 0 while the buffer is cold.
  double offset() const;
  std::size_t buffer_size() const { return residuals_.size(); }

 private:
  ConformalConfig config_;
  std::deque<double> residuals_;
};

// Gaussian conjugate posterior over the demand mean, updated on uncensored steps.
// a = posterior sample + Phi^-1(q) * obs_sd.
struct ThompsonConfig {
  double q = 2.0 / 3.0;
  double min_obs_sd = 0.01;
  std::uint64_t seed = 0;
};

class ThompsonSampler final : public Baseline {
 public:
  explicit ThompsonSampler(ThompsonConfig config = {});
  std::string name() const override { return "thompson"; }
  void reset(const workload::Segment& history, const predictor::Forecaster& forecaster) override;
  void reset(double prior_mean, double obs_sd);
  double act(const stats::GaussianBelief& forecast) override;
  void observe(double a, const env::Feedback& feedback, const stats::GaussianBelief& forecast) override;

  double posterior_mean() const { return post_mean_; }
  double posterior_sd() const { return post_sd_; }
  std::size_t updates() const { return n_; }

 private:
  ThompsonConfig config_;
  std::mt19937_64 rng_;
  double obs_sd_ = 0.1;
  double post_mean_ = 0.5;
  double post_sd_ = 0.1;
  std::size_t n_ = 0;
};

// a = min(1, headroom * max of the last `window` observations).
struct RuleConfig {
  std::size_t window = 48;
  double headroom = 1.15;
};

class RuleAutoscaler final : public Baseline {
 public:
  explicit RuleAutoscaler(RuleConfig config = {});
  std::string name() const override { return "rule"; }
  void reset(const workload::Segment& history, const predictor::Forecaster& forecaster) override;
  double act(const stats::GaussianBelief& forecast) override;
  void observe(double a, const env::Feedback& feedback, const stats::GaussianBelief& forecast) override;
  void push(double y);

 private:
  RuleConfig config_;
  std::deque<double> recent_;
};

// Inverse standard normal CDF by bisection.
double normal_quantile(double p);

// Linear-interpolation sample quantile (the "type 7" rule).
double sample_quantile(std::vector<double> values, double q);

// Runs a baseline through a learner-mode environment. Log rows carry the forecast in
// mu/sigma; k, eta, m and b are zero; reward is -loss(a, y) when uncensored, else 0.
controller::EpisodeResult run_baseline(const workload::Segment& episode, const workload::Segment& history,
                                       const predictor::Forecaster& forecaster, Baseline& baseline,
                                       const env::CostModel& cost);

// The oracle reads the upcoming demand, which only an evaluation-mode environment
// reveals; on a learner environment this throws AccessError.
double oracle_step(const env::Environment& environment);
controller::EpisodeResult run_oracle(const workload::Segment& episode, const env::CostModel& cost);

}  // namespace picrl::baselines
