#include "picrl/loop.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <string>

#include "picrl/errors.hpp"

namespace picrl::controller {

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }

struct Belief {
  double mu = 0.0;
  double sigma = 0.0;
};

// Rolling observation state visible to the learner.
class Observations {
 public:
  Observations(std::size_t window_len, std::size_t est_capacity) : window_len_(window_len), est_(est_capacity) {}

  void seed(const workload::Segment* history) {
    if (history && history->size() > 0) {
      const std::size_t n = history->size();
      const std::size_t from = n > std::max(window_len_, est_.capacity())
                                   ? n - std::max(window_len_, est_.capacity())
                                   : 0;
      for (std::size_t i = from; i < n; ++i) push(history->demands[i], false);
      if (!history->context.empty()) last_context_ = history->context.back();
    }
    const double fill = recent_.empty() ? 0.5 : recent_.front();
    while (recent_.size() < window_len_) recent_.push_front(fill);
  }

  void push(double y, bool censored) {
    recent_.push_back(y);
    while (recent_.size() > window_len_) recent_.pop_front();
    est_.push({y, censored});
  }

  std::vector<double> window() const { return {recent_.begin(), recent_.end()}; }
  const estimator::CensoredWindow& censored_window() const { return est_; }
  std::vector<double>& last_context() { return last_context_; }

 private:
  std::size_t window_len_;
  std::deque<double> recent_;
  estimator::CensoredWindow est_;
  std::vector<double> last_context_;
};

estimator::CensoredEstimate estimate_or_fallback(const estimator::CensoredWindow& window, std::size_t streak,
                                                 const Belief& belief, const LoopConfig& config) {
  const auto& ec = config.estimator;
  estimator::CensoredEstimate est;
  if (window.size() >= 5) {
    est = estimator::estimate(window, streak, ec);
  } else {
    est.mu_hat = belief.mu;
    est.sigma_hat = std::max(belief.sigma, stats::kSigmaFloor);
    est.pessimism = estimator::pessimism_factor(streak, ec.beta, ec.n_max);
    est.uncertainty = est.sigma_hat;
    est.low_confidence = true;
  }
  if (config.controller.ablations.no_pessimism) est.pessimism = 1.0;
  return est;
}

}  // namespace

void DecisionPolicy::record(const agent::Experience&, std::size_t) {}

FrozenPolicy::FrozenPolicy(double eta, double k) {
  if (!(eta >= agent::kEtaMin && eta <= agent::kEtaMax)) throw ValidationError("frozen eta outside [0.5, 3]");
  if (!(k >= agent::kKMin && k <= agent::kKMax)) throw ValidationError("frozen k outside [0, 2]");
  step_.output.eta = eta;
  step_.output.k = k;
  const double pe = std::clamp((eta - agent::kEtaMin) / (agent::kEtaMax - agent::kEtaMin), 1e-12, 1.0 - 1e-12);
  const double pk = std::clamp((k - agent::kKMin) / (agent::kKMax - agent::kKMin), 1e-12, 1.0 - 1e-12);
  step_.output.raw_eta = logit(pe);
  step_.output.raw_k = logit(pk);
  step_.mean = {step_.output.raw_eta, step_.output.raw_k};
}

agent::PolicyStep FrozenPolicy::decide(const agent::AgentState&, std::size_t) { return step_; }

AgentPolicy::AgentPolicy(agent::Agent& agent, agent::PolicyMode mode, bool learn, double kl_coef, double ema_rate)
    : agent_(agent), mode_(mode), learn_(learn), kl_coef_(kl_coef), ema_rate_(ema_rate) {}

agent::PolicyStep AgentPolicy::decide(const agent::AgentState& state, std::size_t n_max) {
  return agent_.act(state, n_max, mode_);
}

void AgentPolicy::record(const agent::Experience& experience, std::size_t t) {
  if (!learn_) return;
  agent_.buffer.push(experience);
  if ((t + 1) % agent_.config().update_every != 0) return;
  agent::UpdateStats stats;
  if (agent::online_update(agent_, kl_coef_, ema_rate_, &stats)) updates_.push_back(stats);
}

agent::PolicyStep CollectingPolicy::decide(const agent::AgentState& state, std::size_t n_max) {
  return agent_.act(state, n_max, agent::PolicyMode::sample);
}

void CollectingPolicy::record(const agent::Experience& experience, std::size_t) {
  experiences.push_back(experience);
}

EpisodeResult run_episode(const workload::Segment& episode, const predictor::Forecaster& forecaster,
                          DecisionPolicy& policy, const LoopConfig& config, const EpisodeStart& start) {
  config.estimator.validate();
  config.controller.validate();
  const auto& ctrl = config.controller;
  const auto& abl = ctrl.ablations;
  const std::size_t horizon = episode.size();
  const std::size_t n_max = config.estimator.n_max;

  env::Environment environment(episode.demands, ctrl.cost, env::Environment::Access::learner);
  Observations obs(forecaster.window_len(), config.estimator.window);
  obs.seed(start.history);

  agent::RewardOptions reward_opts;
  reward_opts.use_imr = !abl.no_uncertainty;
  reward_opts.zero_censored = abl.no_censored_reward;
  reward_opts.unit_pessimism = abl.no_pessimism;

  auto predict = [&](std::size_t t) {
    // Context of the step before t, matching how the forecaster was trained.
    std::span<const double> ctx;
    if (t == 0) {
      ctx = obs.last_context();
      if (ctx.empty() && !episode.context.empty()) ctx = episode.context.front();
    } else if (!episode.context.empty()) {
      ctx = episode.context[t - 1];
    }
    const auto window = obs.window();
    const auto g = forecaster.predict(window, ctx);
    return Belief{g.mean, abl.no_uncertainty ? 0.0 : g.stddev};
  };

  auto make_state = [&](const CalibratorState& calib, const Belief& belief, const estimator::CensoredEstimate& est,
                        std::size_t t) {
    const auto ws = agent::summarize(obs.censored_window());
    const double progress = horizon > 0 ? static_cast<double>(t) / static_cast<double>(horizon) : 0.0;
    return agent::build_state(calib, ws, stats::GaussianBelief{belief.mu, belief.sigma}, est, progress);
  };

  EpisodeResult result;
  if (config.keep_log) result.log.reserve(horizon);
  CalibratorState calib = start.initial;
  if (horizon == 0) {
    result.final_calibrator = calib;
    return result;
  }

  Belief belief = predict(0);
  auto est = estimate_or_fallback(obs.censored_window(), calib.n_censored_streak, belief, config);
  agent::AgentState state = make_state(calib, belief, est, 0);

  for (std::size_t t = 0; t < horizon; ++t) {
    try {
      const agent::PolicyStep decision = policy.decide(state, n_max);
      const double eta = decision.output.eta;
      const double k = abl.no_buffer ? 0.0 : decision.output.k;
      const double a = compose_action(belief.mu, belief.sigma, k, calib);
      const env::Feedback fb = environment.step(a);
      const CalibratorState before = calib;
      calib = fast_update(calib, fb, a, eta, ctrl, t);
      result.max_abs_margin = std::max(result.max_abs_margin, std::abs(calib.m + calib.b));

      double reward = 0.0;
      if (fb.censored) {
        estimator::CensoredEstimate r_est = est;
        if (config.reward_from_predictor) {
          r_est.mu_hat = belief.mu;
          r_est.sigma_hat = std::max(belief.sigma, stats::kSigmaFloor);
        }
        r_est.pessimism = estimator::pessimism_factor(calib.n_censored_streak, config.estimator.beta, n_max);
        reward = agent::surrogate_reward_censored(a, r_est, ctrl.cost, reward_opts);
      } else {
        reward = agent::reward_uncensored(a, fb.y, ctrl.cost);
      }

      obs.push(fb.y, fb.censored);
      const bool done = t + 1 == horizon;
      if (!done) {
        belief = predict(t + 1);
        est = estimate_or_fallback(obs.censored_window(), calib.n_censored_streak, belief, config);
      }
      const agent::AgentState next = done ? state : make_state(calib, belief, est, t + 1);

      agent::Experience exp;
      exp.s = state.features(n_max);
      exp.raw_action = {decision.output.raw_eta, decision.output.raw_k};
      exp.reward = reward;
      exp.s_next = next.features(n_max);
      exp.done = done;
      policy.record(exp, t);

      if (config.keep_log) {
        const auto& rec = environment.ledger().records().back();
        StepLog row;
        row.t = t;
        row.d_true = rec.d_true;
        row.a = a;
        row.y = fb.y;
        row.c = fb.censored;
        row.mu = state.mu;
        row.sigma = state.sigma;
        row.k = k;
        row.eta = eta;
        row.m = before.m;
        row.b = before.b;
        row.reward = reward;
        row.regret_cum = environment.ledger().cumulative_regret();
        row.pessimism = state.pessimism;
        result.log.push_back(row);
      }
      state = next;
    } catch (const TrainingDivergedError&) {
      throw;
    } catch (const Error& e) {
      throw Error("episode aborted at step " + std::to_string(t) + ": " + e.what());
    }
  }

  result.ledger = environment.ledger();
  result.final_calibrator = calib;
  return result;
}

PretrainResult pretrain_offline(const workload::Segment& train, const predictor::Forecaster& forecaster,
                                agent::Agent& agent, const LoopConfig& config, std::size_t epochs) {
  const std::size_t w = std::max(forecaster.window_len(), config.estimator.window);
  if (train.size() <= w + 1) throw ValidationError("pretrain: training segment shorter than the window");

  workload::Segment history, rollout;
  history.demands.assign(train.demands.begin(), train.demands.begin() + static_cast<std::ptrdiff_t>(w));
  rollout.demands.assign(train.demands.begin() + static_cast<std::ptrdiff_t>(w), train.demands.end());
  if (!train.context.empty()) {
    history.context.assign(train.context.begin(), train.context.begin() + static_cast<std::ptrdiff_t>(w));
    rollout.context.assign(train.context.begin() + static_cast<std::ptrdiff_t>(w), train.context.end());
  }

  LoopConfig rollout_cfg = config;
  rollout_cfg.keep_log = false;
  const std::size_t batch = agent.config().batch_size;

  PretrainResult result;
  CalibratorState carry;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    CollectingPolicy collector(agent);
    EpisodeStart start{&history, agent.config().reset_calibrator_per_epoch ? CalibratorState{} : carry};
    const auto episode = run_episode(rollout, forecaster, collector, rollout_cfg, start);
    carry = episode.final_calibrator;

    double eval_loss = 0.0;
    for (const auto& e : collector.experiences) {
      const double v_next = e.done ? 0.0 : agent.value.forward(e.s_next);
      const double delta = e.reward + agent.config().discount * v_next - agent.value.forward(e.s);
      eval_loss += delta * delta;
    }
    if (!collector.experiences.empty()) eval_loss /= static_cast<double>(collector.experiences.size());

    std::vector<std::size_t> order(collector.experiences.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), agent.rng);

    double value_loss = 0.0, policy_loss = 0.0;
    std::size_t batches = 0;
    std::vector<const agent::Experience*> mb;
    for (std::size_t i = 0; i < order.size(); i += batch) {
      mb.clear();
      for (std::size_t j = i; j < std::min(i + batch, order.size()); ++j) mb.push_back(&collector.experiences[order[j]]);
      const auto s = agent.update(mb, 0.0);
      if (!std::isfinite(s.value_loss) || !std::isfinite(s.policy_loss)) {
        throw TrainingDivergedError(epoch, "pretraining loss became non-finite");
      }
      value_loss += s.value_loss;
      policy_loss += s.policy_loss;
      ++batches;
    }
    if (!std::isfinite(eval_loss)) throw TrainingDivergedError(epoch, "critic TD error became non-finite");
    result.value_loss.push_back(eval_loss);
    result.train_value_loss.push_back(batches ? value_loss / static_cast<double>(batches) : 0.0);
    result.policy_loss.push_back(batches ? policy_loss / static_cast<double>(batches) : 0.0);
  }
  agent.ema_policy = agent.policy;
  return result;
}

}  // namespace picrl::controller
