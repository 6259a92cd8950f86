#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "picrl/agent.hpp"
#include "picrl/calibrator.hpp"
#include "picrl/env.hpp"
#include "picrl/estimator.hpp"
#include "picrl/predictor.hpp"
#include "picrl/workload.hpp"

namespace picrl::controller {

// Supplies (eta, k) each step and optionally learns from the resulting experience.
class DecisionPolicy {
 public:
  virtual ~DecisionPolicy() = default;
  virtual agent::PolicyStep decide(const agent::AgentState& state, std::size_t n_max) = 0;
  // Called once per step after the reward is known; `t` is the zero-based step index.
  virtual void record(const agent::Experience& experience, std::size_t t);
};

// Constant (eta, k); never learns.
class FrozenPolicy final : public DecisionPolicy {
 public:
  FrozenPolicy(double eta, double k);
  agent::PolicyStep decide(const agent::AgentState& state, std::size_t n_max) override;

 private:
  agent::PolicyStep step_;
};

// Agent-driven policy. With learning on, every experience enters the replay buffer
// and a KL-anchored batch update runs every `update_every` steps.
class AgentPolicy final : public DecisionPolicy {
 public:
  AgentPolicy(agent::Agent& agent, agent::PolicyMode mode, bool learn, double kl_coef, double ema_rate);
  agent::PolicyStep decide(const agent::AgentState& state, std::size_t n_max) override;
  void record(const agent::Experience& experience, std::size_t t) override;

  const std::vector<agent::UpdateStats>& updates() const { return updates_; }

 private:
  agent::Agent& agent_;
  agent::PolicyMode mode_;
  bool learn_;
  double kl_coef_;
  double ema_rate_;
  std::vector<agent::UpdateStats> updates_;
};

// Samples from the agent's policy and keeps every experience; used for offline rollouts.
class CollectingPolicy final : public DecisionPolicy {
 public:
  explicit CollectingPolicy(agent::Agent& agent) : agent_(agent) {}
  agent::PolicyStep decide(const agent::AgentState& state, std::size_t n_max) override;
  void record(const agent::Experience& experience, std::size_t t) override;

  std::vector<agent::Experience> experiences;

 private:
  agent::Agent& agent_;
};

struct LoopConfig {
  estimator::EstimatorConfig estimator;
  ControllerConfig controller;
  bool reward_from_predictor = false;
  bool keep_log = true;
};

// One row of the per-step log. m and b are the values used to compose a_t.
struct StepLog {
  std::size_t t = 0;
  double d_true = 0.0;
  double a = 0.0;
  double y = 0.0;
  bool c = false;
  double mu = 0.0;
  double sigma = 0.0;
  double k = 0.0;
  double eta = 0.0;
  double m = 0.0;
  double b = 0.0;
  double reward = 0.0;
  double regret_cum = 0.0;
  double pessimism = 1.0;
};

struct EpisodeResult {
  env::EpisodeLedger ledger;
  std::vector<StepLog> log;
  CalibratorState final_calibrator;
  double max_abs_margin = 0.0;  // max over steps of |m + b|
};

// Starting conditions of an episode. `history` seeds the observation window (treated
// as fully observed); `initial` lets a run start from a forced calibrator state.
struct EpisodeStart {
  const workload::Segment* history = nullptr;
  CalibratorState initial;
};

// The closed loop, in order per step: predict, estimate, policy, compose, act,
// fast update, reward, window update, experience. The environment holds the only
// copy of the demand; the loop sees feedback alone.
EpisodeResult run_episode(const workload::Segment& episode, const predictor::Forecaster& forecaster,
                          DecisionPolicy& policy, const LoopConfig& config, const EpisodeStart& start = {});

struct PretrainResult {
  // Mean squared TD error of the critic on each epoch's fresh rollout, measured
  // before that epoch's updates.
  std::vector<double> value_loss;
  // Mean squared TD error over the epoch's update batches.
  std::vector<double> train_value_loss;
  std::vector<double> policy_loss;
};

// Offline actor-critic on rollouts over `train` (KL off). Each epoch collects one
// episode with a sampled policy, then makes one shuffled pass of batch updates.
// The EMA policy is reset to the pretrained policy at the end. Throws
// TrainingDivergedError on a non-finite loss.
PretrainResult pretrain_offline(const workload::Segment& train, const predictor::Forecaster& forecaster,
                                agent::Agent& agent, const LoopConfig& config, std::size_t epochs);

}  // namespace picrl::controller
