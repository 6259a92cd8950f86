#include "picrl/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "picrl/errors.hpp"

namespace picrl::baselines {

namespace {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.5;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// Sliding observation window used to query the forecaster.
class ForecastWindow {
 public:
  ForecastWindow(const workload::Segment& history, std::size_t len) : len_(len) {
    const std::size_t n = history.size();
    for (std::size_t i = n > len ? n - len : 0; i < n; ++i) recent_.push_back(history.demands[i]);
    const double fill = recent_.empty() ? 0.5 : recent_.front();
    while (recent_.size() < len_) recent_.push_front(fill);
    if (!history.context.empty()) last_ctx_ = history.context.back();
  }

  stats::GaussianBelief predict(const predictor::Forecaster& f, const workload::Segment& episode,
                                std::size_t t) const {
    std::span<const double> ctx;
    if (t > 0 && !episode.context.empty()) {
      ctx = episode.context[t - 1];
    } else if (!last_ctx_.empty()) {
      ctx = last_ctx_;
    } else if (!episode.context.empty()) {
      ctx = episode.context.front();
    }
    const std::vector<double> w(recent_.begin(), recent_.end());
    return f.predict(w, ctx);
  }

  void push(double y) {
    recent_.push_back(y);
    if (recent_.size() > len_) recent_.pop_front();
  }

 private:
  std::size_t len_;
  std::deque<double> recent_;
  std::vector<double> last_ctx_;
};

}  // namespace

NaiveMixtureLearner::NaiveMixtureLearner(NaiveConfig config) : config_(config) {
  if (!(config_.rho >= 0.0 && config_.rho <= 1.0)) throw ConfigError("naive.rho must lie in [0, 1]");
  if (!(config_.gamma > 0.0 && config_.gamma <= 1.0)) throw ConfigError("naive.gamma must lie in (0, 1]");
  if (config_.recent == 0) throw ConfigError("naive.recent must be positive");
}

void NaiveMixtureLearner::reset(const workload::Segment& history, const predictor::Forecaster&) {
  reset(mean_of(history.demands));
}

void NaiveMixtureLearner::reset(double history_mean) {
  history_mean_ = history_mean;
  level_ = std::clamp(config_.initial_level >= 0.0 ? config_.initial_level : history_mean, 0.0, 1.0);
  recent_.clear();
  recent_sum_ = 0.0;
}

double NaiveMixtureLearner::target() const {
  const double observed = recent_.empty() ? history_mean_ : recent_sum_ / static_cast<double>(recent_.size());
  return (1.0 - config_.rho) * history_mean_ + config_.rho * observed;
}

double NaiveMixtureLearner::act(const stats::GaussianBelief&) { return level_; }

void NaiveMixtureLearner::observe(double, const env::Feedback& feedback, const stats::GaussianBelief&) {
  step(feedback);
}

void NaiveMixtureLearner::step(const env::Feedback& feedback) {
  if (!feedback.censored) {
    recent_.push_back(feedback.y);
    recent_sum_ += feedback.y;
    if (recent_.size() > config_.recent) {
      recent_sum_ -= recent_.front();
      recent_.pop_front();
    }
  }
  level_ = std::clamp(level_ + config_.gamma * (target() - level_), 0.0, 1.0);
}

ConformalCalibrator::ConformalCalibrator(ConformalConfig config) : config_(config) {
  if (!(config_.q > 0.0 && config_.q < 1.0)) throw ConfigError("conformal.q must lie in (0, 1)");
  if (config_.capacity == 0 || config_.warm > config_.capacity) {
    throw ConfigError("conformal buffer needs 0 < warm <= capacity");
  }
}

void ConformalCalibrator::add_residual(double r) {
  residuals_.push_back(r);
  if (residuals_.size() > config_.capacity) residuals_.pop_front();
}

void ConformalCalibrator::reset(const workload::Segment& history, const predictor::Forecaster& forecaster) {
  residuals_.clear();
  const std::size_t w = forecaster.window_len();
  const std::size_t n = history.size();
  if (n <= w) return;
  const std::size_t from = std::max(w, n > config_.capacity ? n - config_.capacity : std::size_t{0});
  for (std::size_t i = from; i < n; ++i) {
    std::span<const double> window(history.demands.data() + (i - w), w);
    std::span<const double> ctx;
    if (!history.context.empty()) ctx = history.context[i - 1];
    add_residual(history.demands[i] - forecaster.predict(window, ctx).mean);
  }
}

double ConformalCalibrator::offset() const {
  if (residuals_.size() < config_.warm) return 0.0;
  return sample_quantile({residuals_.begin(), residuals_.end()}, config_.q);
}

double ConformalCalibrator::act(const stats::GaussianBelief& forecast) {
  return std::clamp(forecast.mean + offset(), 0.0, 1.0);
}

void ConformalCalibrator::observe(double, const env::Feedback& feedback, const stats::GaussianBelief& forecast) {
  if (!feedback.censored) add_residual(feedback.y - forecast.mean);
}

ThompsonSampler::ThompsonSampler(ThompsonConfig config) : config_(config), rng_(config.seed) {
  if (!(config_.q > 0.0 && config_.q < 1.0)) throw ConfigError("thompson.q must lie in (0, 1)");
  if (!(config_.min_obs_sd > 0.0)) throw ConfigError("thompson.min_obs_sd must be > 0");
}

void ThompsonSampler::reset(const workload::Segment& history, const predictor::Forecaster&) {
  reset(mean_of(history.demands), sd_of(history.demands));
}

void ThompsonSampler::reset(double prior_mean, double obs_sd) {
  obs_sd_ = std::max(obs_sd, config_.min_obs_sd);
  post_mean_ = prior_mean;
  post_sd_ = obs_sd_;  // one pseudo-observation of prior weight
  n_ = 0;
  rng_.seed(config_.seed);
}

double ThompsonSampler::act(const stats::GaussianBelief&) {
  std::normal_distribution<double> normal(post_mean_, post_sd_);
  const double theta = normal(rng_);
  return std::clamp(theta + normal_quantile(config_.q) * obs_sd_, 0.0, 1.0);
}

void ThompsonSampler::observe(double, const env::Feedback& feedback, const stats::GaussianBelief&) {
  if (feedback.censored) return;
  const double prior_prec = 1.0 / (post_sd_ * post_sd_);
  const double obs_prec = 1.0 / (obs_sd_ * obs_sd_);
  const double prec = prior_prec + obs_prec;
  post_mean_ = (prior_prec * post_mean_ + obs_prec * feedback.y) / prec;
  post_sd_ = std::sqrt(1.0 / prec);
  ++n_;
}

RuleAutoscaler::RuleAutoscaler(RuleConfig config) : config_(config) {
  if (config_.window == 0) throw ConfigError("rule.window must be positive");
  if (!(config_.headroom >= 1.0)) throw ConfigError("rule.headroom must be >= 1");
}

void RuleAutoscaler::push(double y) {
  recent_.push_back(y);
  if (recent_.size() > config_.window) recent_.pop_front();
}

void RuleAutoscaler::reset(const workload::Segment& history, const predictor::Forecaster&) {
  recent_.clear();
  const std::size_t n = history.size();
  for (std::size_t i = n > config_.window ? n - config_.window : 0; i < n; ++i) push(history.demands[i]);
}

double RuleAutoscaler::act(const stats::GaussianBelief& forecast) {
  if (recent_.empty()) return std::clamp(forecast.mean, 0.0, 1.0);
  return std::min(1.0, config_.headroom * *std::max_element(recent_.begin(), recent_.end()));
}

void RuleAutoscaler::observe(double, const env::Feedback& feedback, const stats::GaussianBelief&) {
  push(feedback.y);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ValidationError("normal_quantile needs p in (0, 1)");
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    (stats::normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double sample_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ValidationError("sample_quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

controller::EpisodeResult run_baseline(const workload::Segment& episode, const workload::Segment& history,
                                       const predictor::Forecaster& forecaster, Baseline& baseline,
                                       const env::CostModel& cost) {
  env::Environment environment(episode.demands, cost, env::Environment::Access::learner);
  ForecastWindow window(history, forecaster.window_len());
  baseline.reset(history, forecaster);

  controller::EpisodeResult result;
  result.log.reserve(episode.size());
  for (std::size_t t = 0; t < episode.size(); ++t) {
    const auto forecast = window.predict(forecaster, episode, t);
    const double a = std::clamp(baseline.act(forecast), 0.0, 1.0);
    const auto fb = environment.step(a);
    baseline.observe(a, fb, forecast);
    window.push(fb.y);

    controller::StepLog row;
    row.t = t;
    row.d_true = environment.ledger().records().back().d_true;
    row.a = a;
    row.y = fb.y;
    row.c = fb.censored;
    row.mu = forecast.mean;
    row.sigma = forecast.stddev;
    row.reward = fb.censored ? 0.0 : agent::reward_uncensored(a, fb.y, cost);
    row.regret_cum = environment.ledger().cumulative_regret();
    result.log.push_back(row);
  }
  result.ledger = environment.ledger();
  return result;
}

double oracle_step(const env::Environment& environment) { return environment.oracle_demand(); }

controller::EpisodeResult run_oracle(const workload::Segment& episode, const env::CostModel& cost) {
  env::Environment environment(episode.demands, cost, env::Environment::Access::evaluation);
  controller::EpisodeResult result;
  result.log.reserve(episode.size());
  for (std::size_t t = 0; t < episode.size(); ++t) {
    const double a = oracle_step(environment);
    const auto fb = environment.step(a);
    controller::StepLog row;
    row.t = t;
    row.d_true = a;
    row.a = a;
    row.y = fb.y;
    row.c = fb.censored;
    row.mu = a;
    row.regret_cum = environment.ledger().cumulative_regret();
    result.log.push_back(row);
  }
  result.ledger = environment.ledger();
  return result;
}

}  // namespace picrl::baselines
