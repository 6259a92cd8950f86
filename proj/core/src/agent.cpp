#include "picrl/agent.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "picrl/errors.hpp"

namespace picrl::agent {

namespace {

constexpr double kHalfLog2Pi = 0.918938533204672741780329736406;
constexpr double kLogStdSpan = kLogStdMax - kLogStdMin;

double logit(double p) { return std::log(p / (1.0 - p)); }

// log |d squash / d raw| for a sigmoid scaled to a range of width `span`.
double log_squash_jacobian(double raw, double span) {
  const double s = nn::sigmoid(raw);
  return std::log(span * s * (1.0 - s));
}

}  // namespace

void AgentConfig::validate() const {
  if (!(discount >= 0.0 && discount < 1.0)) throw ConfigError("agent.discount must lie in [0, 1)");
  if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) throw ConfigError("agent learning rates must be > 0");
  if (batch_size < 1) throw ConfigError("agent.batch_size must be >= 1");
  if (replay_capacity < batch_size) throw ConfigError("agent.replay_capacity must be >= batch_size");
  if (update_every < 1) throw ConfigError("agent.update_every must be >= 1");
  if (!(kl_coef >= 0.0)) throw ConfigError("agent.kl_coef must be >= 0");
  if (!(ema_rate >= 0.0 && ema_rate < 1.0)) throw ConfigError("agent.ema_rate must lie in [0, 1)");
  if (!(entropy_coef >= 0.0)) throw ConfigError("agent.entropy_coef must be >= 0");
  if (hidden_width < 1) throw ConfigError("agent.hidden_width must be >= 1");
  if (!(grad_clip > 0.0)) throw ConfigError("agent.grad_clip must be > 0");
}

void to_json(nlohmann::json& j, const AgentConfig& c) {
  j = nlohmann::json{{"discount", c.discount},
                     {"actor_lr", c.actor_lr},
                     {"critic_lr", c.critic_lr},
                     {"batch_size", c.batch_size},
                     {"replay_capacity", c.replay_capacity},
                     {"update_every", c.update_every},
                     {"kl_coef", c.kl_coef},
                     {"ema_rate", c.ema_rate},
                     {"entropy_coef", c.entropy_coef},
                     {"hidden_width", c.hidden_width},
                     {"pretrain_epochs", c.pretrain_epochs},
                     {"grad_clip", c.grad_clip},
                     {"online_sampling", c.online_sampling},
                     {"reset_calibrator_per_epoch", c.reset_calibrator_per_epoch},
                     {"reward_from_predictor", c.reward_from_predictor}};
}

void from_json(const nlohmann::json& j, AgentConfig& c) {
  j.at("discount").get_to(c.discount);
  j.at("actor_lr").get_to(c.actor_lr);
  j.at("critic_lr").get_to(c.critic_lr);
  j.at("batch_size").get_to(c.batch_size);
  j.at("replay_capacity").get_to(c.replay_capacity);
  j.at("update_every").get_to(c.update_every);
  j.at("kl_coef").get_to(c.kl_coef);
  j.at("ema_rate").get_to(c.ema_rate);
  j.at("entropy_coef").get_to(c.entropy_coef);
  j.at("hidden_width").get_to(c.hidden_width);
  j.at("pretrain_epochs").get_to(c.pretrain_epochs);
  j.at("grad_clip").get_to(c.grad_clip);
  j.at("online_sampling").get_to(c.online_sampling);
  j.at("reset_calibrator_per_epoch").get_to(c.reset_calibrator_per_epoch);
  j.at("reward_from_predictor").get_to(c.reward_from_predictor);
}

WindowStats summarize(const estimator::CensoredWindow& window) {
  WindowStats s;
  const auto& entries = window.entries();
  if (entries.empty()) return s;
  std::size_t censored = 0;
  double sum = 0.0;
  for (const auto& e : entries) {
    censored += e.censored ? 1 : 0;
    sum += e.value;
  }
  const double n = static_cast<double>(entries.size());
  s.censor_rate = static_cast<double>(censored) / n;
  s.obs_mean = sum / n;
  double ss = 0.0;
  for (const auto& e : entries) ss += (e.value - s.obs_mean) * (e.value - s.obs_mean);
  s.obs_std = std::sqrt(ss / n);
  return s;
}

std::array<double, kStateSize> AgentState::features(std::size_t n_max) const {
  const double scale = 1.0 / static_cast<double>(std::max<std::size_t>(n_max, 1));
  return {m,
          b,
          recent_censor_rate,
          static_cast<double>(consecutive_censored) * scale,
          static_cast<double>(consecutive_over) * scale,
          recent_obs_mean,
          recent_obs_std,
          episode_progress,
          mu,
          sigma,
          est_mu,
          est_sigma,
          pessimism,
          est_uncertainty};
}

AgentState build_state(const controller::CalibratorState& calib, const WindowStats& window,
                       const stats::GaussianBelief& prediction, const estimator::CensoredEstimate& estimate,
                       double progress) {
  AgentState s;
  s.m = calib.m;
  s.b = calib.b;
  s.recent_censor_rate = window.censor_rate;
  s.consecutive_censored = calib.n_censored_streak;
  s.consecutive_over = calib.n_over_streak;
  s.recent_obs_mean = window.obs_mean;
  s.recent_obs_std = window.obs_std;
  s.episode_progress = std::clamp(progress, 0.0, 1.0);
  s.mu = prediction.mean;
  s.sigma = prediction.stddev;
  s.est_mu = estimate.mu_hat;
  s.est_sigma = estimate.sigma_hat;
  s.pessimism = estimate.pessimism;
  s.est_uncertainty = estimate.uncertainty;
  return s;
}

double surrogate_reward_censored(double a, const estimator::CensoredEstimate& est, const env::CostModel& cost,
                                 const RewardOptions& options) {
  if (options.zero_censored) return 0.0;
  double gap = est.mu_hat - a;
  if (options.use_imr) {
    const double sigma = std::max(est.sigma_hat, stats::kSigmaFloor);
    const double alpha = (a - est.mu_hat) / sigma;
    gap = est.mu_hat + sigma * stats::inverse_mills(alpha) - a;
  }
  const double psi = options.unit_pessimism ? 1.0 : est.pessimism;
  return -cost.c_under * gap * psi;
}

double reward_uncensored(double a, double d, const env::CostModel& cost) { return -cost.loss(a, d); }

double squash_eta(double raw) { return kEtaMin + (kEtaMax - kEtaMin) * nn::sigmoid(raw); }
double squash_k(double raw) { return kKMin + (kKMax - kKMin) * nn::sigmoid(raw); }

double gaussian_log_prob(const std::array<double, 2>& raw, const std::array<double, 2>& mean,
                         const std::array<double, 2>& log_std) {
  double lp = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double z = (raw[i] - mean[i]) * std::exp(-log_std[i]);
    lp += -0.5 * z * z - log_std[i] - kHalfLog2Pi;
  }
  return lp;
}

double squashed_log_prob(double eta, double k, const std::array<double, 2>& mean,
                         const std::array<double, 2>& log_std) {
  const double u = logit((eta - kEtaMin) / (kEtaMax - kEtaMin));
  const double v = logit((k - kKMin) / (kKMax - kKMin));
  return gaussian_log_prob({u, v}, mean, log_std) - log_squash_jacobian(u, kEtaMax - kEtaMin) -
         log_squash_jacobian(v, kKMax - kKMin);
}

PolicyNetwork::PolicyNetwork(std::size_t hidden_width, std::uint64_t seed)
    : net_({kStateSize, hidden_width, hidden_width, 4}, seed) {
  // Start near the centre of the action box.
  auto& p = net_.parameters();
  const std::size_t last = hidden_width * 4 + 4;
  for (std::size_t i = p.size() - last; i < p.size(); ++i) p[i] *= 0.01;
}

PolicyNetwork::PolicyNetwork(nn::Mlp net) : net_(std::move(net)) {
  if (net_.input_size() != kStateSize || net_.output_size() != 4) throw ShapeError("policy network shape");
}

void PolicyNetwork::distribution(std::span<const double> features, std::array<double, 2>& mean,
                                 std::array<double, 2>& log_std, nn::Mlp::Tape* tape) const {
  nn::Mlp::Tape local;
  nn::Mlp::Tape& t = tape ? *tape : local;
  net_.forward(features, t);
  const auto& out = t.activations.back();
  for (int i = 0; i < 2; ++i) {
    mean[i] = out[i];
    log_std[i] = kLogStdMin + kLogStdSpan * nn::sigmoid(out[2 + i]);
  }
}

PolicyStep PolicyNetwork::forward(std::span<const double> features, PolicyMode mode, std::mt19937_64& rng) const {
  PolicyStep step;
  distribution(features, step.mean, step.log_std);
  std::array<double, 2> raw = step.mean;
  if (mode == PolicyMode::sample) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < 2; ++i) raw[i] += std::exp(step.log_std[i]) * normal(rng);
  }
  step.output.raw_eta = raw[0];
  step.output.raw_k = raw[1];
  step.output.eta = squash_eta(raw[0]);
  step.output.k = squash_k(raw[1]);
  step.log_prob = gaussian_log_prob(raw, step.mean, step.log_std) -
                  log_squash_jacobian(raw[0], kEtaMax - kEtaMin) - log_squash_jacobian(raw[1], kKMax - kKMin);
  return step;
}

ValueNetwork::ValueNetwork(std::size_t hidden_width, std::uint64_t seed)
    : net_({kStateSize, hidden_width, hidden_width, 1}, seed) {}

ValueNetwork::ValueNetwork(nn::Mlp net) : net_(std::move(net)) {
  if (net_.input_size() != kStateSize || net_.output_size() != 1) throw ShapeError("value network shape");
}

double ValueNetwork::forward(std::span<const double> features) const { return net_.forward(features)[0]; }

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw ConfigError("replay capacity must be positive");
  items_.reserve(capacity_);
}

void ReplayBuffer::push(const Experience& e) {
  if (!std::isfinite(e.reward)) throw ValidationError("experience reward must be finite");
  if (items_.size() < capacity_) {
    items_.push_back(e);
  } else {
    items_[head_] = e;
    head_ = (head_ + 1) % capacity_;
  }
}

const Experience& ReplayBuffer::at(std::size_t i) const {
  if (i >= items_.size()) throw ValidationError("replay index out of range");
  return items_[(head_ + i) % items_.size()];
}

std::vector<const Experience*> ReplayBuffer::sample(std::size_t n, std::mt19937_64& rng) const {
  std::vector<const Experience*> out;
  if (items_.empty()) return out;
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(&items_[pick(rng)]);
  return out;
}

Agent::Agent(const AgentConfig& config, std::uint64_t seed)
    : policy(config.hidden_width, seed * 4 + 1),
      ema_policy(policy),
      value(config.hidden_width, seed * 4 + 2),
      buffer(config.replay_capacity),
      rng(seed * 4 + 3),
      config_(config),
      actor_opt_(policy.network().parameter_count(), config.actor_lr),
      critic_opt_(value.network().parameter_count(), config.critic_lr) {
  config_.validate();
}

PolicyStep Agent::act(const AgentState& state, std::size_t n_max, PolicyMode mode) {
  const auto f = state.features(n_max);
  return policy.forward(f, mode, rng);
}

BatchGradients Agent::gradients(std::span<const Experience* const> batch, double kl_coef) const {
  const auto& pnet = policy.network();
  const auto& vnet = value.network();
  BatchGradients out;
  out.policy.assign(pnet.parameter_count(), 0.0);
  out.value.assign(vnet.parameter_count(), 0.0);
  if (batch.empty()) return out;
  auto& stats = out.stats;
  auto& pgrad = out.policy;
  auto& vgrad = out.value;
  nn::Mlp::Tape ptape, vtape;

  for (const Experience* e : batch) {
    vnet.forward(e->s, vtape);
    const double v = vtape.activations.back()[0];
    const double v_next = e->done ? 0.0 : vnet.forward(e->s_next)[0];
    const double delta = e->reward + config_.discount * v_next - v;
    const double dv = -delta;
    vnet.backward(vtape, std::span<const double>(&dv, 1), vgrad);
    stats.value_loss += delta * delta;
    stats.mean_advantage += delta;

    std::array<double, 2> mean{}, log_std{}, ema_mean{}, ema_log_std{};
    policy.distribution(e->s, mean, log_std, &ptape);
    ema_policy.distribution(e->s, ema_mean, ema_log_std);
    const auto& head = ptape.activations.back();
    const double log_prob = gaussian_log_prob(e->raw_action, mean, log_std);
    std::array<double, 4> g{};
    double kl = 0.0;
    for (int i = 0; i < 2; ++i) {
      const double var = std::exp(2.0 * log_std[i]);
      const double ema_var = std::exp(2.0 * ema_log_std[i]);
      const double r = e->raw_action[i] - mean[i];
      const double dm = mean[i] - ema_mean[i];
      kl += ema_log_std[i] - log_std[i] + (var + dm * dm) / (2.0 * ema_var) - 0.5;
      const double d_mean = -delta * r / var + kl_coef * dm / ema_var;
      const double d_log_std = -delta * (r * r / var - 1.0) - config_.entropy_coef + kl_coef * (var / ema_var - 1.0);
      const double s = nn::sigmoid(head[2 + i]);
      g[i] = d_mean;
      g[2 + i] = d_log_std * kLogStdSpan * s * (1.0 - s);
    }
    pnet.backward(ptape, g, pgrad);
    stats.policy_loss += -delta * log_prob + kl_coef * kl;
    stats.mean_kl += kl;
  }

  const double inv = 1.0 / static_cast<double>(batch.size());
  for (double& x : pgrad) x *= inv;
  for (double& x : vgrad) x *= inv;
  stats.value_loss *= inv;
  stats.policy_loss *= inv;
  stats.mean_kl *= inv;
  stats.mean_advantage *= inv;
  return out;
}

UpdateStats Agent::update(std::span<const Experience* const> batch, double kl_coef) {
  if (batch.empty()) return {};
  auto g = gradients(batch, kl_coef);
  nn::clip_grad_norm(g.policy, config_.grad_clip);
  nn::clip_grad_norm(g.value, config_.grad_clip);
  actor_opt_.step(policy.network().parameters(), g.policy);
  critic_opt_.step(value.network().parameters(), g.value);
  return g.stats;
}

void Agent::update_ema(double rate) {
  auto& ema = ema_policy.network().parameters();
  const auto& cur = policy.network().parameters();
  for (std::size_t i = 0; i < ema.size(); ++i) ema[i] = rate * ema[i] + (1.0 - rate) * cur[i];
}

nlohmann::json Agent::to_json() const {
  return nlohmann::json{{"policy", network_checkpoint("policy", policy.network())},
                        {"value", network_checkpoint("value", value.network())}};
}

void Agent::load_networks(const nlohmann::json& policy_j, const nlohmann::json& value_j) {
  policy = PolicyNetwork(network_from_checkpoint("policy", policy_j));
  value = ValueNetwork(network_from_checkpoint("value", value_j));
  ema_policy = policy;
  actor_opt_ = nn::Adam(policy.network().parameter_count(), config_.actor_lr);
  critic_opt_ = nn::Adam(value.network().parameter_count(), config_.critic_lr);
}

bool online_update(Agent& agent, double kl_coef, double ema_rate, UpdateStats* stats) {
  if (agent.buffer.size() < agent.config().batch_size) return false;
  const auto batch = agent.buffer.sample(agent.config().batch_size, agent.rng);
  const UpdateStats s = agent.update(batch, kl_coef);
  agent.update_ema(ema_rate);
  if (stats) *stats = s;
  return true;
}

nlohmann::json network_checkpoint(const std::string& kind, const nn::Mlp& net) {
  return nlohmann::json{{"format", "picrl." + kind}, {"version", 1}, {"network", net.to_json()}};
}

nn::Mlp network_from_checkpoint(const std::string& kind, const nlohmann::json& j) {
  if (j.value("format", std::string{}) != "picrl." + kind || j.value("version", 0) != 1) {
    throw ConfigError("not a version-1 " + kind + " checkpoint");
  }
  return nn::Mlp::from_json(j.at("network"));
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read " + path.string());
  return nlohmann::json::parse(in);
}

}  // namespace picrl::agent
