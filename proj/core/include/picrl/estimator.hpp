#pragma once

#include <cstddef>
#include <deque>

#include <nlohmann/json.hpp>

namespace picrl::estimator {

struct EstimatorConfig {
  std::size_t window = 64;
  double beta = 0.5;
  std::size_t n_max = 10;
  double fallback_sigma = 0.05;  // sigma used when every entry in the window is censored
  int max_iterations = 25;

  void validate() const;
};

void to_json(nlohmann::json& j, const EstimatorConfig& c);
void from_json(const nlohmann::json& j, EstimatorConfig& c);

struct CensoredEntry {
  double value = 0.0;     // y_t: the demand if uncensored, the action otherwise
  bool censored = false;
};

// Bounded FIFO of recent feedback.
class CensoredWindow {
 public:
  explicit CensoredWindow(std::size_t capacity);

  void push(CensoredEntry entry);
  const std::deque<CensoredEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  std::deque<CensoredEntry> entries_;
};

struct CensoredEstimate {
  double mu_hat = 0.0;
  double sigma_hat = 0.0;
  double pessimism = 1.0;
  double uncertainty = 0.0;
  bool low_confidence = false;  // every entry was censored
  int iterations = 0;
};

// 1 + beta * min(n, n_max)
double pessimism_factor(std::size_t n_consecutive_censored, double beta, std::size_t n_max);

// Tobit maximum-likelihood fit of N(mu, sigma^2) to the window: uncensored entries
// contribute density terms, censored entries upper-tail survival terms. Requires at
// least five entries (ValidationError otherwise).
CensoredEstimate estimate(const CensoredWindow& window, std::size_t n_censored_streak,
                          const EstimatorConfig& config);

// Censored-data log-likelihood used by estimate(); exposed for oracles.
double tobit_log_likelihood(const std::deque<CensoredEntry>& entries, double mu, double sigma);

}  // namespace picrl::estimator
