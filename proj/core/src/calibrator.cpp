#include "picrl/calibrator.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "picrl/errors.hpp"

namespace picrl::controller {

void AblationFlags::enable(const std::string& code) {
  if (code == "A1") no_uncertainty = true;
  else if (code == "A2") no_censored_reward = true;
  else if (code == "A3") no_pessimism = true;
  else if (code == "A4") no_buffer = true;
  else if (code == "A5") no_kl = true;
  else if (code == "A6") no_ema = true;
  else if (code == "A7") no_pretrain = true;
  else throw ConfigError("unknown ablation '" + code + "' (expected A1..A7)");
}

std::vector<std::string> AblationFlags::codes() const {
  std::vector<std::string> out;
  if (no_uncertainty) out.push_back("A1");
  if (no_censored_reward) out.push_back("A2");
  if (no_pessimism) out.push_back("A3");
  if (no_buffer) out.push_back("A4");
  if (no_kl) out.push_back("A5");
  if (no_ema) out.push_back("A6");
  if (no_pretrain) out.push_back("A7");
  return out;
}

bool AblationFlags::any() const { return !codes().empty(); }

void ControllerConfig::validate() const {
  if (!(delta_m > 0.0) || !(delta_b > 0.0)) throw ConfigError("controller.delta_m and delta_b must be > 0");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("controller.gamma must lie in (0, 1]");
  if (!(step_decay_offset > 0.0) || !(step_decay_exponent > 0.0)) {
    throw ConfigError("controller step decay parameters must be > 0");
  }
  cost.validate();
}

double ControllerConfig::step_scale(std::size_t t) const {
  if (!diminishing_steps) return 1.0;
  return std::pow(1.0 + static_cast<double>(t) / step_decay_offset, -step_decay_exponent);
}

void to_json(nlohmann::json& j, const ControllerConfig& c) {
  j = nlohmann::json{{"delta_m", c.delta_m},
                     {"delta_b", c.delta_b},
                     {"gamma", c.gamma},
                     {"c_under", c.cost.c_under},
                     {"c_over", c.cost.c_over},
                     {"diminishing_steps", c.diminishing_steps},
                     {"step_decay_offset", c.step_decay_offset},
                     {"step_decay_exponent", c.step_decay_exponent}};
}

void from_json(const nlohmann::json& j, ControllerConfig& c) {
  j.at("delta_m").get_to(c.delta_m);
  j.at("delta_b").get_to(c.delta_b);
  j.at("gamma").get_to(c.gamma);
  j.at("c_under").get_to(c.cost.c_under);
  j.at("c_over").get_to(c.cost.c_over);
  j.at("diminishing_steps").get_to(c.diminishing_steps);
  j.at("step_decay_offset").get_to(c.step_decay_offset);
  j.at("step_decay_exponent").get_to(c.step_decay_exponent);
}

double compose_action(double mu, double sigma, double k, const CalibratorState& calib) {
  return std::clamp(mu + k * sigma + calib.m + calib.b, 0.0, 1.0);
}

CalibratorState fast_update(const CalibratorState& calib, const env::Feedback& feedback, double a, double eta,
                            const ControllerConfig& config, std::size_t t) {
  if (!(eta >= 0.5 && eta <= 3.0)) throw ValidationError(fmt::format("fast_update: eta {} outside [0.5, 3]", eta));
  const double scale = config.step_scale(t);
  CalibratorState next = calib;
  if (feedback.censored) {
    next.m += eta * config.delta_m * scale;
    next.b += eta * config.delta_b * scale;
    ++next.n_censored_streak;
    next.n_over_streak = 0;
  } else if (a > feedback.y) {
    next.m -= eta * config.delta_m * scale;
    next.b -= config.gamma * eta * config.delta_b * scale;
    ++next.n_over_streak;
    next.n_censored_streak = 0;
  } else {
    next.n_censored_streak = 0;
    next.n_over_streak = 0;
  }
  return next;
}

double equilibrium_censoring_rate(const ControllerConfig& config) {
  const double up = config.delta_m + config.delta_b;
  const double down = config.delta_m + config.gamma * config.delta_b;
  return down / (up + down);
}

}  // namespace picrl::controller
