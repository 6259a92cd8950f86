#include <cmath>
#include <random>

#include "doctest.h"
#include "picrl/agent.hpp"
#include "picrl/errors.hpp"
#include "picrl/stats.hpp"

using namespace picrl;
using doctest::Approx;

namespace {

agent::AgentConfig small_agent() {
  agent::AgentConfig c;
  c.hidden_width = 12;
  c.batch_size = 8;
  c.replay_capacity = 64;
  return c;
}

std::vector<agent::Experience> random_experiences(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<agent::Experience> out(n);
  for (auto& e : out) {
    for (auto& x : e.s) x = u(rng);
    for (auto& x : e.s_next) x = u(rng);
    e.raw_action = {2.0 * u(rng), 2.0 * u(rng)};
    e.reward = u(rng);
    e.done = u(rng) > 0.8;
  }
  return out;
}

std::vector<const agent::Experience*> pointers(const std::vector<agent::Experience>& v) {
  std::vector<const agent::Experience*> p;
  for (const auto& e : v) p.push_back(&e);
  return p;
}

// Independent restatement of the actor objective with TD errors held fixed.
double actor_objective(const agent::Agent& a, const std::vector<agent::Experience>& batch,
                       const std::vector<double>& deltas, double kl_coef) {
  double total = 0.0;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    std::array<double, 2> mean{}, log_std{}, em{}, els{};
    a.policy.distribution(batch[j].s, mean, log_std);
    a.ema_policy.distribution(batch[j].s, em, els);
    for (int i = 0; i < 2; ++i) {
      const double sd = std::exp(log_std[i]);
      const double z = (batch[j].raw_action[i] - mean[i]) / sd;
      const double logp = -0.5 * z * z - log_std[i] - 0.5 * std::log(2.0 * M_PI);
      const double esd = std::exp(els[i]);
      const double kl = std::log(esd / sd) + (sd * sd + (mean[i] - em[i]) * (mean[i] - em[i])) / (2 * esd * esd) - 0.5;
      total += -deltas[j] * logp - a.config().entropy_coef * log_std[i] + kl_coef * kl;
    }
  }
  return total / static_cast<double>(batch.size());
}

double relative_gap(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3}); }

}  // namespace

TEST_CASE("censored surrogate reward") {
  const env::CostModel cost;
  estimator::CensoredEstimate est;
  est.mu_hat = 0.5;
  est.sigma_hat = 0.1;
  est.pessimism = 2.0;
  const double r2 = agent::surrogate_reward_censored(0.5, est, cost);
  CHECK(r2 == Approx(-0.31915382432114616).epsilon(1e-12));
  est.pessimism = 1.0;
  const double r1 = agent::surrogate_reward_censored(0.5, est, cost);
  CHECK(r1 == Approx(-0.15957691216057308).epsilon(1e-12));
  CHECK(r2 == 2.0 * r1);
  CHECK(agent::surrogate_reward_censored(0.6, est, cost) > r1);

  agent::RewardOptions no_imr;
  no_imr.use_imr = false;
  CHECK(agent::surrogate_reward_censored(0.4, est, cost, no_imr) == Approx(-0.2));
  agent::RewardOptions zero;
  zero.zero_censored = true;
  CHECK(agent::surrogate_reward_censored(0.4, est, cost, zero) == 0.0);
  agent::RewardOptions unit;
  unit.unit_pessimism = true;
  est.pessimism = 6.0;
  CHECK(agent::surrogate_reward_censored(0.5, est, cost, unit) == Approx(r1));
}

TEST_CASE("uncensored reward") {
  const env::CostModel cost;
  CHECK(agent::reward_uncensored(0.5, 0.7, cost) == Approx(-0.4));
  CHECK(agent::reward_uncensored(0.5, 0.5, cost) == 0.0);
  CHECK(agent::reward_uncensored(0.6, 0.5, cost) == Approx(-0.1));
}

TEST_CASE("state construction") {
  estimator::CensoredWindow w(10);
  for (int i = 0; i < 10; ++i) w.push({0.5, i < 4});
  const auto ws = agent::summarize(w);
  CHECK(ws.censor_rate == Approx(0.4));

  const auto fresh = agent::build_state({}, {}, {0.5, 0.1}, {}, 0.0);
  CHECK(fresh.m == 0.0);
  CHECK(fresh.b == 0.0);
  CHECK(fresh.consecutive_censored == 0);
  CHECK(fresh.episode_progress == 0.0);

  controller::CalibratorState calib;
  calib.n_censored_streak = 3;
  estimator::CensoredEstimate est;
  est.pessimism = estimator::pessimism_factor(3, 0.5, 10);
  const auto s = agent::build_state(calib, ws, {0.5, 0.1}, est, 0.3);
  CHECK(s.consecutive_censored == 3);
  CHECK(s.pessimism == 2.5);
  CHECK(s.features(10)[3] == Approx(0.3));
}

TEST_CASE("policy squashing") {
  nn::Mlp zero({agent::kStateSize, 8, 8, 4}, 1);
  std::fill(zero.parameters().begin(), zero.parameters().end(), 0.0);
  const agent::PolicyNetwork net(zero);
  std::mt19937_64 rng(1);
  const std::array<double, agent::kStateSize> f{};
  const auto mean = net.forward(f, agent::PolicyMode::mean, rng);
  CHECK(mean.output.eta == Approx(1.75));
  CHECK(mean.output.k == Approx(1.0));

  const agent::PolicyNetwork wide(8, 3);
  for (int i = 0; i < 100000; ++i) {
    const auto s = wide.forward(f, agent::PolicyMode::sample, rng);
    REQUIRE(s.output.eta >= agent::kEtaMin);
    REQUIRE(s.output.eta <= agent::kEtaMax);
    REQUIRE(s.output.k >= agent::kKMin);
    REQUIRE(s.output.k <= agent::kKMax);
  }
}

TEST_CASE("squashed log density integrates along a slice") {
  const std::array<double, 2> mean{0.3, -0.4};
  const std::array<double, 2> log_std{-0.2, 0.1};
  const double k0 = 0.8;
  // Marginal density of k at k0 from the numerical derivative of its CDF.
  auto cdf_k = [&](double k) {
    const double v = std::log((k / 2.0) / (1.0 - k / 2.0));
    return stats::normal_cdf((v - mean[1]) / std::exp(log_std[1]));
  };
  const double h = 1e-5;
  const double marginal = (cdf_k(k0 + h) - cdf_k(k0 - h)) / (2 * h);
  // Simpson's rule over eta in (0.5, 3).
  const int n = 20000;
  const double lo = agent::kEtaMin + 1e-9, hi = agent::kEtaMax - 1e-9, step = (hi - lo) / n;
  double integral = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    integral += w * std::exp(agent::squashed_log_prob(lo + i * step, k0, mean, log_std));
  }
  integral *= step / 3.0;
  CHECK(relative_gap(integral, marginal) < 1e-4);

  // The sampled log-probability agrees with the squashed density of the sample.
  const agent::PolicyNetwork net(8, 9);
  std::mt19937_64 rng(4);
  const std::array<double, agent::kStateSize> f{};
  const auto s = net.forward(f, agent::PolicyMode::sample, rng);
  CHECK(s.log_prob == Approx(agent::squashed_log_prob(s.output.eta, s.output.k, s.mean, s.log_std)).epsilon(1e-8));
}

TEST_CASE("actor and critic gradients match central differences") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    agent::Agent a(small_agent(), seed);
    // Move the EMA policy off the current one so the KL term has a gradient.
    auto& ema = a.ema_policy.network().parameters();
    std::mt19937_64 rng(seed + 100);
    std::normal_distribution<double> jitter(0.0, 0.05);
    for (double& p : ema) p += jitter(rng);
    const auto batch = random_experiences(6, seed);
    const auto ptrs = pointers(batch);
    const double kl_coef = 0.3;
    const auto g = a.gradients(ptrs, kl_coef);

    std::vector<double> deltas;
    for (const auto& e : batch) {
      const double v_next = e.done ? 0.0 : a.value.forward(e.s_next);
      deltas.push_back(e.reward + a.config().discount * v_next - a.value.forward(e.s));
    }

    double worst_actor = 0.0;
    auto& pp = a.policy.network().parameters();
    for (std::size_t i = 0; i < pp.size(); ++i) {
      const double h = 1e-6, keep = pp[i];
      pp[i] = keep + h;
      const double up = actor_objective(a, batch, deltas, kl_coef);
      pp[i] = keep - h;
      const double down = actor_objective(a, batch, deltas, kl_coef);
      pp[i] = keep;
      worst_actor = std::max(worst_actor, relative_gap((up - down) / (2 * h), g.policy[i]));
    }
    CHECK(worst_actor < 1e-4);

    std::vector<double> targets;
    for (std::size_t j = 0; j < batch.size(); ++j) targets.push_back(deltas[j] + a.value.forward(batch[j].s));
    auto critic_objective = [&] {
      double total = 0.0;
      for (std::size_t j = 0; j < batch.size(); ++j) {
        const double r = targets[j] - a.value.forward(batch[j].s);
        total += 0.5 * r * r;
      }
      return total / static_cast<double>(batch.size());
    };
    double worst_critic = 0.0;
    auto& vp = a.value.network().parameters();
    for (std::size_t i = 0; i < vp.size(); ++i) {
      const double h = 1e-6, keep = vp[i];
      vp[i] = keep + h;
      const double up = critic_objective();
      vp[i] = keep - h;
      const double down = critic_objective();
      vp[i] = keep;
      worst_critic = std::max(worst_critic, relative_gap((up - down) / (2 * h), g.value[i]));
    }
    CHECK(worst_critic < 1e-4);
  }
}

TEST_CASE("zero rewards leave only entropy and KL in the actor gradient") {
  auto cfg = small_agent();
  cfg.entropy_coef = 0.0;
  agent::Agent a(cfg, 2);
  std::fill(a.value.network().parameters().begin(), a.value.network().parameters().end(), 0.0);
  auto batch = random_experiences(8, 3);
  for (auto& e : batch) e.reward = 0.0;
  const auto g = a.gradients(pointers(batch), 0.0);
  for (double x : g.policy) CHECK(x == 0.0);
  for (double x : g.value) CHECK(x == 0.0);
}

TEST_CASE("without KL the EMA policy is irrelevant") {
  agent::Agent a(small_agent(), 4);
  const auto batch = random_experiences(8, 5);
  const auto before = a.gradients(pointers(batch), 0.0);
  for (double& p : a.ema_policy.network().parameters()) p += 0.1;
  const auto after = a.gradients(pointers(batch), 0.0);
  CHECK(before.policy == after.policy);
}

TEST_CASE("strong KL anchoring pins the policy") {
  agent::Agent a(small_agent(), 6);
  const auto batch = random_experiences(8, 7);
  for (const auto& e : batch) a.buffer.push(e);
  const std::array<double, agent::kStateSize> probe{};
  std::array<double, 2> m0{}, ls{};
  a.policy.distribution(probe, m0, ls);
  std::array<double, 2> prev = m0;
  agent::UpdateStats stats;
  for (int step = 0; step < 20; ++step) {
    REQUIRE(agent::online_update(a, 1e6, 0.99, &stats));
    std::array<double, 2> m{};
    a.policy.distribution(probe, m, ls);
    for (int i = 0; i < 2; ++i) CHECK(std::abs(m[i] - prev[i]) < 1e-3);
    prev = m;
  }
}

TEST_CASE("online update gates on batch size") {
  agent::Agent a(small_agent(), 8);
  const auto before = a.policy.network().parameters();
  for (const auto& e : random_experiences(7, 9)) a.buffer.push(e);
  CHECK_FALSE(agent::online_update(a, 0.1, 0.99));
  CHECK(a.policy.network().parameters() == before);
  for (const auto& e : random_experiences(1, 10)) a.buffer.push(e);
  CHECK(agent::online_update(a, 0.1, 0.99));
  CHECK(a.policy.network().parameters() != before);
}

TEST_CASE("replay buffer evicts oldest first and samples reproducibly") {
  agent::ReplayBuffer buf(3);
  auto exps = random_experiences(5, 11);
  for (int i = 0; i < 5; ++i) {
    exps[i].reward = i;
    buf.push(exps[i]);
  }
  CHECK(buf.size() == 3);
  CHECK(buf.at(0).reward == 2.0);
  CHECK(buf.at(2).reward == 4.0);
  std::mt19937_64 r1(3), r2(3);
  const auto s1 = buf.sample(10, r1);
  const auto s2 = buf.sample(10, r2);
  CHECK(s1 == s2);
  exps[0].reward = std::nan("");
  CHECK_THROWS_AS(buf.push(exps[0]), ValidationError);
}

TEST_CASE("network checkpoints round trip") {
  agent::Agent a(small_agent(), 12);
  const auto pj = agent::network_checkpoint("policy", a.policy.network());
  const auto vj = agent::network_checkpoint("value", a.value.network());
  agent::Agent b(small_agent(), 13);
  b.load_networks(pj, vj);
  CHECK(b.policy.network().parameters() == a.policy.network().parameters());
  CHECK(b.value.network().parameters() == a.value.network().parameters());
  CHECK_THROWS(agent::network_from_checkpoint("value", pj));
}

TEST_CASE("same seed, same agent") {
  agent::Agent a(small_agent(), 21), b(small_agent(), 21);
  const auto batch = random_experiences(8, 22);
  a.update(pointers(batch), 0.1);
  b.update(pointers(batch), 0.1);
  CHECK(a.policy.network().parameters() == b.policy.network().parameters());
}
