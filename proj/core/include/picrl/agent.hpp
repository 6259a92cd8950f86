#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "picrl/calibrator.hpp"
#include "picrl/env.hpp"
#include "picrl/estimator.hpp"
#include "picrl/nn.hpp"
#include "picrl/stats.hpp"

namespace picrl::agent {

inline constexpr std::size_t kStateSize = 14;

inline constexpr double kEtaMin = 0.5;
inline constexpr double kEtaMax = 3.0;
inline constexpr double kKMin = 0.0;
inline constexpr double kKMax = 2.0;
inline constexpr double kLogStdMin = -4.0;
inline constexpr double kLogStdMax = 0.5;

struct AgentConfig {
  double discount = 0.95;
  double actor_lr = 3e-4;
  double critic_lr = 1e-3;
  std::size_t batch_size = 64;
  std::size_t replay_capacity = 4096;
  std::size_t update_every = 16;
  double kl_coef = 0.1;
  double ema_rate = 0.99;
  double entropy_coef = 1e-3;
  std::size_t hidden_width = 64;
  std::size_t pretrain_epochs = 20;
  double grad_clip = 5.0;
  bool online_sampling = true;           // sample (eta, k) online; false uses the mean
  bool reset_calibrator_per_epoch = true;
  bool reward_from_predictor = false;    // surrogate uses predictor (mu, sigma) instead of the estimator

  void validate() const;
};

void to_json(nlohmann::json& j, const AgentConfig& c);
void from_json(const nlohmann::json& j, AgentConfig& c);

// Summary of the recent feedback window.
struct WindowStats {
  double censor_rate = 0.0;
  double obs_mean = 0.0;
  double obs_std = 0.0;
};

WindowStats summarize(const estimator::CensoredWindow& window);

// The 14 runtime features, in network order.
struct AgentState {
  double m = 0.0;
  double b = 0.0;
  double recent_censor_rate = 0.0;
  std::size_t consecutive_censored = 0;
  std::size_t consecutive_over = 0;
  double recent_obs_mean = 0.0;
  double recent_obs_std = 0.0;
  double episode_progress = 0.0;
  double mu = 0.0;
  double sigma = 0.0;
  double est_mu = 0.0;
  double est_sigma = 0.0;
  double pessimism = 1.0;
  double est_uncertainty = 0.0;

  // Network input; streak counts are divided by n_max.
  std::array<double, kStateSize> features(std::size_t n_max) const;
};

AgentState build_state(const controller::CalibratorState& calib, const WindowStats& window,
                       const stats::GaussianBelief& prediction, const estimator::CensoredEstimate& estimate,
                       double progress);

struct RewardOptions {
  bool use_imr = true;          // false: gap = mu_hat - a
  bool zero_censored = false;   // reward 0 on censored steps
  bool unit_pessimism = false;  // Psi == 1
};

// -c_under * (mu_hat + sigma_hat * lambda((a - mu_hat) / sigma_hat) - a) * Psi
double surrogate_reward_censored(double a, const estimator::CensoredEstimate& est, const env::CostModel& cost,
                                 const RewardOptions& options = {});

// -loss(a, d)
double reward_uncensored(double a, double d, const env::CostModel& cost);

struct PolicyOutput {
  double eta = 1.75;
  double k = 1.0;
  double raw_eta = 0.0;  // pre-squash Gaussian sample
  double raw_k = 0.0;
};

enum class PolicyMode { sample, mean };

struct PolicyStep {
  PolicyOutput output;
  double log_prob = 0.0;  // density of (eta, k), including the squash correction
  std::array<double, 2> mean{};
  std::array<double, 2> log_std{};
};

// Gaussian policy over two pre-squash coordinates, squashed by scaled sigmoids into
// [0.5, 3] x [0, 2].
class PolicyNetwork {
 public:
  PolicyNetwork() = default;
  PolicyNetwork(std::size_t hidden_width, std::uint64_t seed);
  explicit PolicyNetwork(nn::Mlp net);

  PolicyStep forward(std::span<const double> features, PolicyMode mode, std::mt19937_64& rng) const;
  // Mean and log-std heads.
  void distribution(std::span<const double> features, std::array<double, 2>& mean,
                    std::array<double, 2>& log_std, nn::Mlp::Tape* tape = nullptr) const;

  nn::Mlp& network() { return net_; }
  const nn::Mlp& network() const { return net_; }

 private:
  nn::Mlp net_;
};

class ValueNetwork {
 public:
  ValueNetwork() = default;
  ValueNetwork(std::size_t hidden_width, std::uint64_t seed);
  explicit ValueNetwork(nn::Mlp net);

  double forward(std::span<const double> features) const;
  nn::Mlp& network() { return net_; }
  const nn::Mlp& network() const { return net_; }

 private:
  nn::Mlp net_;
};

// log N(raw; mean, exp(log_std)) summed over both coordinates.
double gaussian_log_prob(const std::array<double, 2>& raw, const std::array<double, 2>& mean,
                         const std::array<double, 2>& log_std);
// Log-density of a squashed output; the inverse of the scaled sigmoid is applied first.
double squashed_log_prob(double eta, double k, const std::array<double, 2>& mean,
                         const std::array<double, 2>& log_std);
double squash_eta(double raw);
double squash_k(double raw);

struct Experience {
  std::array<double, kStateSize> s{};
  std::array<double, 2> raw_action{};
  double reward = 0.0;
  std::array<double, kStateSize> s_next{};
  bool done = false;
};

// Fixed-capacity FIFO ring with seeded uniform sampling (with replacement).
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(const Experience& e);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Experience& at(std::size_t i) const;  // 0 = oldest
  std::vector<const Experience*> sample(std::size_t n, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::vector<Experience> items_;
  std::size_t head_ = 0;  // next write position once full
};

struct UpdateStats {
  double value_loss = 0.0;  // mean squared TD error over the batch
  double policy_loss = 0.0;
  double mean_kl = 0.0;
  double mean_advantage = 0.0;
};

struct BatchGradients {
  std::vector<double> policy;
  std::vector<double> value;
  UpdateStats stats;
};

// Actor-critic learner: policy, value, EMA policy, replay buffer, optimizers, RNG.
class Agent {
 public:
  Agent(const AgentConfig& config, std::uint64_t seed);

  PolicyStep act(const AgentState& state, std::size_t n_max, PolicyMode mode);

  // One batch step with one-step TD advantages:
  //   critic: 0.5 * delta^2, actor: -delta * log pi - entropy_coef * H + kl_coef * KL(pi || pi_ema).
  UpdateStats update(std::span<const Experience* const> batch, double kl_coef);
  // Batch-mean gradients of those losses before clipping; TD errors are treated as
  // constants (semi-gradient), so the critic gradient is -delta * dV(s).
  BatchGradients gradients(std::span<const Experience* const> batch, double kl_coef) const;
  void update_ema(double rate);

  const AgentConfig& config() const { return config_; }
  PolicyNetwork policy;
  PolicyNetwork ema_policy;
  ValueNetwork value;
  ReplayBuffer buffer;
  std::mt19937_64 rng;

  nlohmann::json to_json() const;
  // Restores network weights; optimizer state and RNG restart.
  void load_networks(const nlohmann::json& policy_j, const nlohmann::json& value_j);

 private:
  AgentConfig config_;
  nn::Adam actor_opt_;
  nn::Adam critic_opt_;
};

// Batch actor-critic update from the replay buffer with KL anchoring to the EMA
// policy, followed by the EMA refresh. Returns false (no-op) when the buffer holds
// fewer than batch_size experiences.
bool online_update(Agent& agent, double kl_coef, double ema_rate, UpdateStats* stats = nullptr);

// Checkpoint helpers shared by policy and value files.
nlohmann::json network_checkpoint(const std::string& kind, const nn::Mlp& net);
nn::Mlp network_from_checkpoint(const std::string& kind, const nlohmann::json& j);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace picrl::agent
