#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "picrl/env.hpp"

namespace picrl::controller {

// Fast-loop variables of the reactive calibrator.
struct CalibratorState {
  double m = 0.0;  // margin
  double b = 0.0;  // bias
  std::size_t n_censored_streak = 0;
  std::size_t n_over_streak = 0;
};

// Component switches for the ablation study.
struct AblationFlags {
  bool no_uncertainty = false;      // A1: sigma_t forced to 0, no IMR term
  bool no_censored_reward = false;  // A2: reward 0 on censored steps
  bool no_pessimism = false;        // A3: Psi == 1
  bool no_buffer = false;           // A4: k == 0
  bool no_kl = false;               // A5: kl_coef = 0
  bool no_ema = false;              // A6: ema_rate = 0
  bool no_pretrain = false;         // A7: skip offline pretraining

  // Accepts "A1".."A7"; throws ConfigError on anything else.
  void enable(const std::string& code);
  std::vector<std::string> codes() const;
  bool any() const;
};

struct ControllerConfig {
  double delta_m = 0.005;
  double delta_b = 0.002;
  double gamma = 0.5;
  env::CostModel cost;
  AblationFlags ablations;
  bool diminishing_steps = false;
  double step_decay_offset = 1000.0;
  double step_decay_exponent = 0.6;

  void validate() const;
  // Multiplier on delta_m, delta_b at step t: 1, or (1 + t/offset)^-exponent.
  double step_scale(std::size_t t) const;
};

void to_json(nlohmann::json& j, const ControllerConfig& c);
void from_json(const nlohmann::json& j, ControllerConfig& c);

// clip(mu + k * sigma + m + b, 0, 1)
double compose_action(double mu, double sigma, double k, const CalibratorState& calib);

// Event-driven calibration. Censored: m += eta*dm, b += eta*db. Uncensored with
// a > y: m -= eta*dm, b -= gamma*eta*db. Uncensored exact hit: no change. Streak
// counters reset on the opposite event. Throws ValidationError when eta is outside [0.5, 3].
CalibratorState fast_update(const CalibratorState& calib, const env::Feedback& feedback, double a, double eta,
                            const ControllerConfig& config, std::size_t t = 0);

// Censoring rate at which the expected drift of m + b vanishes under constant eta.
double equilibrium_censoring_rate(const ControllerConfig& config);

}  // namespace picrl::controller
