#include "picrl/verify.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "picrl/agent.hpp"
#include "picrl/baselines.hpp"
#include "picrl/calibrator.hpp"
#include "picrl/errors.hpp"
#include "picrl/estimator.hpp"
#include "picrl/loop.hpp"
#include "picrl/stats.hpp"

namespace picrl::verify {

namespace {

using Clock = std::chrono::steady_clock;

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> unit_gaussian(std::size_t n, double mean, double sd, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(mean, sd);
  std::vector<double> out(n);
  for (auto& x : out) x = std::clamp(normal(rng), 0.0, 1.0);
  return out;
}

double final_naive_level(double rho, const Prop1Options& o, std::uint64_t seed) {
  baselines::NaiveConfig cfg;
  cfg.rho = rho;
  cfg.initial_level = o.mean;
  baselines::NaiveMixtureLearner learner(cfg);
  const auto history = unit_gaussian(o.history, o.mean, o.stddev, seed + 1000003);
  learner.reset(std::accumulate(history.begin(), history.end(), 0.0) / static_cast<double>(history.size()));
  env::Environment environment(unit_gaussian(o.steps, o.mean, o.stddev, seed), env::CostModel{});
  while (!environment.done()) {
    const double a = learner.act(stats::GaussianBelief{});
    learner.step(environment.step(a));
  }
  return learner.level();
}

Check make_check(std::string name, double value, std::string criterion, bool pass) {
  return Check{std::move(name), value, std::move(criterion), pass};
}

}  // namespace

bool Verdict::pass() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

nlohmann::json Verdict::to_json() const {
  nlohmann::json checks_j = nlohmann::json::array();
  for (const auto& c : checks) {
    checks_j.push_back({{"name", c.name}, {"value", c.value}, {"criterion", c.criterion}, {"pass", c.pass}});
  }
  return {{"suite", suite}, {"pass", pass()}, {"seconds", seconds}, {"checks", checks_j}};
}

std::string Verdict::table() const {
  std::string out = fmt::format("{:<44} {:>14}  {:<28} {}\n", "check", "value", "criterion", "result");
  for (const auto& c : checks) {
    out += fmt::format("{:<44} {:>14.6g}  {:<28} {}\n", c.name, c.value, c.criterion, c.pass ? "PASS" : "FAIL");
  }
  out += fmt::format("suite {}: {} ({:.2f} s)\n", suite, pass() ? "PASS" : "FAIL", seconds);
  return out;
}

Verdict prop1(const Prop1Options& o) {
  const auto t0 = Clock::now();
  Verdict v{"prop1", {}, 0.0};
  std::vector<double> trapped, control;
  for (std::size_t i = 0; i < o.seeds; ++i) {
    trapped.push_back(final_naive_level(1.0, o, o.base_seed + i));
    control.push_back(final_naive_level(0.0, o, o.base_seed + i));
  }
  const double med = median(trapped);
  const auto below = static_cast<double>(std::count_if(trapped.begin(), trapped.end(), [](double a) { return a < 0.45; }));
  const auto [cmin, cmax] = std::minmax_element(control.begin(), control.end());
  v.checks.push_back(make_check("rho=1 median final level", med, "<= 0.45", med <= 0.45));
  v.checks.push_back(make_check("rho=1 drift from E[D]", med - o.mean, "< -0.05", med - o.mean < -0.05));
  v.checks.push_back(make_check("rho=1 share of seeds below 0.45", below / static_cast<double>(o.seeds), ">= 0.95",
                                below / static_cast<double>(o.seeds) >= 0.95));
  v.checks.push_back(make_check("rho=0 min final level", *cmin, ">= 0.48", *cmin >= 0.48));
  v.checks.push_back(make_check("rho=0 max final level", *cmax, "<= 0.52", *cmax <= 0.52));
  v.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return v;
}

Verdict prop2(const Prop2Options& o) {
  const auto t0 = Clock::now();
  Verdict v{"prop2", {}, 0.0};
  const env::CostModel cost;
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> u_mu(0.1, 0.9), u_sigma(0.01, 0.3), u_a(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> u_n(0, 10);

  double min_fd = std::numeric_limits<double>::infinity();
  std::size_t positive = 0;
  for (std::size_t i = 0; i < o.triples; ++i) {
    estimator::CensoredEstimate est;
    est.mu_hat = u_mu(rng);
    est.sigma_hat = u_sigma(rng);
    est.pessimism = estimator::pessimism_factor(u_n(rng), 0.5, 10);
    const double a = u_a(rng);
    const double h = 1e-6;
    const double lo = std::max(0.0, a - h), hi = std::min(1.0, a + h);
    const double fd =
        (agent::surrogate_reward_censored(hi, est, cost) - agent::surrogate_reward_censored(lo, est, cost)) / (hi - lo);
    min_fd = std::min(min_fd, fd);
    positive += fd > 0.0 ? 1 : 0;
  }
  v.checks.push_back(make_check("finite-difference dr/da > 0 (share)",
                                static_cast<double>(positive) / static_cast<double>(o.triples), "== 1",
                                positive == o.triples));
  v.checks.push_back(make_check("min finite-difference dr/da", min_fd, "> 0", min_fd > 0.0));

  double lam_min = std::numeric_limits<double>::infinity(), lam_max = -lam_min;
  const auto n_grid = static_cast<long>(std::llround(16.0 / o.grid_step));
  for (long i = 0; i <= n_grid; ++i) {
    const double z = -8.0 + static_cast<double>(i) * o.grid_step;
    const double d = stats::inverse_mills_derivative(z);
    lam_min = std::min(lam_min, d);
    lam_max = std::max(lam_max, d);
  }
  v.checks.push_back(make_check("min lambda'(z) on [-8, 8]", lam_min, "> 0", lam_min > 0.0));
  v.checks.push_back(make_check("max lambda'(z) on [-8, 8]", lam_max, fmt::format("<= 1 - {:g}", o.margin),
                                lam_max <= 1.0 - o.margin));

  std::size_t exact = 0;
  for (std::size_t i = 0; i < o.escape_triples; ++i) {
    estimator::CensoredEstimate est;
    est.mu_hat = u_mu(rng);
    est.sigma_hat = u_sigma(rng);
    const double a = u_a(rng);
    est.pessimism = estimator::pessimism_factor(0, 0.5, 10);
    const double r0 = agent::surrogate_reward_censored(a, est, cost);
    est.pessimism = estimator::pessimism_factor(10, 0.5, 10);
    const double rn = agent::surrogate_reward_censored(a, est, cost);
    exact += std::abs(rn) == (1.0 + 0.5 * 10.0) * std::abs(r0) ? 1 : 0;
  }
  v.checks.push_back(make_check("escape scaling exact (share)",
                                static_cast<double>(exact) / static_cast<double>(o.escape_triples), "== 1",
                                exact == o.escape_triples));
  v.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return v;
}

Verdict equilibrium(const EquilibriumOptions& o) {
  const auto t0 = Clock::now();
  Verdict v{"equilibrium", {}, 0.0};
  struct Case {
    const char* label;
    double delta_m, delta_b;
  };
  for (const Case c : {Case{"defaults", 0.005, 0.002}, Case{"delta_m = delta_b", 0.005, 0.005}}) {
    controller::LoopConfig loop;
    loop.controller.delta_m = c.delta_m;
    loop.controller.delta_b = c.delta_b;
    loop.keep_log = false;
    const double p_star = controller::equilibrium_censoring_rate(loop.controller);
    workload::Segment seg, history;
    seg.demands = unit_gaussian(o.steps, 0.5, 0.1, o.seed);
    history.demands = unit_gaussian(128, 0.5, 0.1, o.seed + 1000);
    const predictor::FixedForecaster forecaster(0.5, 0.1, 32);
    controller::FrozenPolicy policy(o.eta, o.k);
    const auto result = controller::run_episode(seg, forecaster, policy, loop, {&history, {}});
    const auto& recs = result.ledger.records();
    std::size_t censored = 0;
    for (std::size_t i = recs.size() - o.trailing; i < recs.size(); ++i) censored += recs[i].censored ? 1 : 0;
    const double rate = static_cast<double>(censored) / static_cast<double>(o.trailing);
    v.checks.push_back(make_check(fmt::format("{}: p*", c.label), p_star, "formula", true));
    v.checks.push_back(make_check(fmt::format("{}: trailing censoring rate", c.label), rate,
                                  fmt::format("|x - {:.4f}| <= {:g}", p_star, o.tolerance),
                                  std::abs(rate - p_star) <= o.tolerance));
    v.checks.push_back(make_check(fmt::format("{}: max |m + b|", c.label), result.max_abs_margin,
                                  fmt::format("<= {:g}", o.bound), result.max_abs_margin <= o.bound));
  }
  v.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return v;
}

Verdict stability(const StabilityOptions& o) {
  const auto t0 = Clock::now();
  Verdict v{"stability", {}, 0.0};
  workload::Segment seg, history;
  seg.demands = unit_gaussian(o.steps, 0.5, 0.1, o.seed);
  history.demands = unit_gaussian(128, 0.5, 0.1, o.seed + 1000);
  const predictor::FixedForecaster forecaster(0.5, 0.1, 32);
  controller::LoopConfig loop;
  loop.keep_log = false;

  {
    controller::FrozenPolicy frozen(1.0, 1.0);
    const auto r = controller::run_episode(seg, forecaster, frozen, loop, {&history, {}});
    v.checks.push_back(make_check("updates off: max |m + b|", r.max_abs_margin, fmt::format("<= {:g}", o.bound),
                                  r.max_abs_margin <= o.bound));
  }
  {
    agent::Agent learner(agent::AgentConfig{}, o.seed);
    controller::AgentPolicy policy(learner, agent::PolicyMode::sample, true, learner.config().kl_coef,
                                   learner.config().ema_rate);
    const auto r = controller::run_episode(seg, forecaster, policy, loop, {&history, {}});
    v.checks.push_back(make_check("updates on: max |m + b|", r.max_abs_margin, fmt::format("<= {:g}", o.bound),
                                  r.max_abs_margin <= o.bound));
    v.checks.push_back(make_check("updates on: policy updates run", static_cast<double>(policy.updates().size()),
                                  "> 0", !policy.updates().empty()));
  }
  {
    auto dim = loop;
    dim.controller.diminishing_steps = true;
    controller::FrozenPolicy frozen(1.0, 1.0);
    const auto r = controller::run_episode(seg, forecaster, frozen, dim, {&history, {}});
    v.checks.push_back(make_check("diminishing steps: max |m + b|", r.max_abs_margin,
                                  fmt::format("<= {:g}", o.bound), r.max_abs_margin <= o.bound));
  }
  {
    // Forecast pinned at 0.2 while demand sits near 0.6.
    workload::Segment high, high_hist;
    high.demands = unit_gaussian(o.escape_steps, 0.6, 0.05, o.seed + 1);
    high_hist.demands = std::vector<double>(64, 0.2);
    const predictor::FixedForecaster low(0.2, 0.02, 32);
    agent::Agent learner(agent::AgentConfig{}, o.seed + 1);
    controller::AgentPolicy policy(learner, agent::PolicyMode::sample, true, learner.config().kl_coef,
                                   learner.config().ema_rate);
    controller::LoopConfig esc;
    const auto r = controller::run_episode(high, low, policy, esc, {&high_hist, {}});
    const auto& recs = r.ledger.records();
    double trailing = 1.0;
    std::size_t exit_step = recs.size();
    for (std::size_t t = 50; t <= recs.size(); ++t) {
      std::size_t c = 0;
      for (std::size_t i = t - 50; i < t; ++i) c += recs[i].censored ? 1 : 0;
      trailing = static_cast<double>(c) / 50.0;
      if (trailing < 0.9) {
        exit_step = t;
        break;
      }
    }
    v.checks.push_back(make_check("escape: steps until trailing-50 censoring < 0.9",
                                  static_cast<double>(exit_step), fmt::format("<= {}", o.escape_steps),
                                  exit_step <= o.escape_steps));
  }
  v.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return v;
}

const std::vector<std::string>& suites() {
  static const std::vector<std::string> names{"prop1", "prop2", "equilibrium", "stability"};
  return names;
}

Verdict run(const std::string& suite) {
  if (suite == "prop1") return prop1();
  if (suite == "prop2") return prop2();
  if (suite == "equilibrium") return equilibrium();
  if (suite == "stability") return stability();
  throw ConfigError("unknown verify suite '" + suite + "' (prop1, prop2, equilibrium, stability)");
}

}  // namespace picrl::verify
