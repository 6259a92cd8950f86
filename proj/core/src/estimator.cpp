#include "picrl/estimator.hpp"

#include <algorithm>
#include <cmath>

#include "picrl/errors.hpp"
#include "picrl/stats.hpp"

namespace picrl::estimator {

namespace {

constexpr double kMuLo = -1.0;
constexpr double kMuHi = 2.0;
constexpr double kSigmaHi = 2.0;
constexpr double kHalfLog2Pi = 0.918938533204672741780329736406;

struct Derivatives {
  double ll = 0.0;
  double g_mu = 0.0, g_sigma = 0.0;
  double h_mm = 0.0, h_ms = 0.0, h_ss = 0.0;
};

Derivatives derivatives(const std::deque<CensoredEntry>& entries, double mu, double sigma) {
  Derivatives d;
  const double inv = 1.0 / sigma;
  const double inv2 = inv * inv;
  for (const auto& e : entries) {
    const double z = (e.value - mu) * inv;
    if (!e.censored) {
      d.ll += -std::log(sigma) - 0.5 * z * z - kHalfLog2Pi;
      d.g_mu += z * inv;
      d.g_sigma += (z * z - 1.0) * inv;
      d.h_mm += -inv2;
      d.h_ms += -2.0 * z * inv2;
      d.h_ss += (1.0 - 3.0 * z * z) * inv2;
    } else {
      const double lam = stats::inverse_mills(z);
      const double dlam = lam * (lam - z);
      const double sf = stats::normal_sf(z);
      d.ll += sf > 0.0 ? std::log(sf) : -0.5 * z * z - std::log(z) - kHalfLog2Pi;
      d.g_mu += lam * inv;
      d.g_sigma += lam * z * inv;
      d.h_mm += -dlam * inv2;
      d.h_ms += -(dlam * z + lam) * inv2;
      d.h_ss += -(dlam * z * z + 2.0 * lam * z) * inv2;
    }
  }
  return d;
}

// Root of a decreasing-through-zero function on [lo, hi] by bisection.
template <class F>
double bisect(F&& f, double lo, double hi, int iterations) {
  double flo = f(lo);
  const double fhi = f(hi);
  if (flo <= 0.0) return lo;
  if (fhi >= 0.0) return hi;
  for (int i = 0; i < iterations; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) > 0.0) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

void EstimatorConfig::validate() const {
  if (window < 5) throw ConfigError("estimator.window must be >= 5");
  if (!(beta >= 0.0)) throw ConfigError("estimator.beta must be >= 0");
  if (n_max < 1) throw ConfigError("estimator.n_max must be >= 1");
  if (!(fallback_sigma > 0.0)) throw ConfigError("estimator.fallback_sigma must be > 0");
  if (max_iterations < 1) throw ConfigError("estimator.max_iterations must be >= 1");
}

void to_json(nlohmann::json& j, const EstimatorConfig& c) {
  j = nlohmann::json{{"window", c.window}, {"beta", c.beta}, {"n_max", c.n_max},
                     {"fallback_sigma", c.fallback_sigma}, {"max_iterations", c.max_iterations}};
}

void from_json(const nlohmann::json& j, EstimatorConfig& c) {
  j.at("window").get_to(c.window);
  j.at("beta").get_to(c.beta);
  j.at("n_max").get_to(c.n_max);
  j.at("fallback_sigma").get_to(c.fallback_sigma);
  j.at("max_iterations").get_to(c.max_iterations);
}

CensoredWindow::CensoredWindow(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw ConfigError("CensoredWindow capacity must be positive");
}

void CensoredWindow::push(CensoredEntry entry) {
  if (!(entry.value >= 0.0 && entry.value <= 1.0)) throw ValidationError("CensoredWindow values must lie in [0,1]");
  if (entries_.size() == capacity_) entries_.pop_front();
  entries_.push_back(entry);
}

double pessimism_factor(std::size_t n_consecutive_censored, double beta, std::size_t n_max) {
  return 1.0 + beta * static_cast<double>(std::min(n_consecutive_censored, n_max));
}

double tobit_log_likelihood(const std::deque<CensoredEntry>& entries, double mu, double sigma) {
  return derivatives(entries, mu, sigma).ll;
}

CensoredEstimate estimate(const CensoredWindow& window, std::size_t n_censored_streak,
                          const EstimatorConfig& config) {
  const auto& entries = window.entries();
  if (entries.size() < 5) throw ValidationError("estimate: window needs at least 5 entries");

  CensoredEstimate est;
  est.pessimism = pessimism_factor(n_censored_streak, config.beta, config.n_max);

  std::size_t n_unc = 0;
  double sum = 0.0, sum_all = 0.0, max_censored = 0.0;
  for (const auto& e : entries) {
    sum_all += e.value;
    if (e.censored) {
      max_censored = std::max(max_censored, e.value);
    } else {
      ++n_unc;
      sum += e.value;
    }
  }

  if (n_unc == 0) {
    double ss = 0.0;
    const double m = sum_all / static_cast<double>(entries.size());
    for (const auto& e : entries) ss += (e.value - m) * (e.value - m);
    est.sigma_hat = std::max(std::sqrt(ss / static_cast<double>(entries.size())), config.fallback_sigma);
    // Expected excess of N(a, sigma^2) above a is sigma * lambda(0).
    est.mu_hat = max_censored + est.sigma_hat * stats::inverse_mills(0.0);
    est.uncertainty = est.sigma_hat;
    est.low_confidence = true;
    return est;
  }

  const double mean_unc = sum / static_cast<double>(n_unc);
  double ss = 0.0;
  for (const auto& e : entries) {
    if (!e.censored) ss += (e.value - mean_unc) * (e.value - mean_unc);
  }
  const double sd_unc = std::sqrt(ss / static_cast<double>(n_unc));

  if (n_unc == entries.size()) {
    est.mu_hat = mean_unc;
    est.sigma_hat = std::max(sd_unc, stats::kSigmaFloor);
  } else {
    double mu = sum_all / static_cast<double>(entries.size());
    double sigma = std::clamp(sd_unc, 0.01, kSigmaHi);
    Derivatives d = derivatives(entries, mu, sigma);
    int it = 0;
    for (; it < config.max_iterations; ++it) {
      // Newton step on (mu, sigma); fall back to coordinate bisection when the
      // Hessian is not negative definite or the step leaves the feasible box.
      const double det = d.h_mm * d.h_ss - d.h_ms * d.h_ms;
      bool accepted = false;
      if (d.h_mm < 0.0 && det > 0.0) {
        const double step_mu = -(d.h_ss * d.g_mu - d.h_ms * d.g_sigma) / det;
        const double step_sigma = -(-d.h_ms * d.g_mu + d.h_mm * d.g_sigma) / det;
        double t = 1.0;
        for (int half = 0; half < 12; ++half, t *= 0.5) {
          const double nm = mu + t * step_mu;
          const double ns = sigma + t * step_sigma;
          if (ns <= stats::kSigmaFloor || ns > kSigmaHi || nm < kMuLo || nm > kMuHi) continue;
          const Derivatives nd = derivatives(entries, nm, ns);
          if (nd.ll >= d.ll - 1e-12) {
            const double moved = std::abs(nm - mu) + std::abs(ns - sigma);
            mu = nm;
            sigma = ns;
            d = nd;
            accepted = true;
            if (moved < 1e-10) it = config.max_iterations;
            break;
          }
        }
      }
      if (!accepted) {
        mu = bisect([&](double m) { return derivatives(entries, m, sigma).g_mu; }, kMuLo, kMuHi, 50);
        sigma = bisect([&](double s) { return derivatives(entries, mu, s).g_sigma; }, stats::kSigmaFloor,
                       kSigmaHi, 50);
        const Derivatives nd = derivatives(entries, mu, sigma);
        const bool stalled = std::abs(nd.ll - d.ll) < 1e-12;
        d = nd;
        if (stalled) break;
      }
    }
    est.iterations = std::min(it, config.max_iterations);
    est.mu_hat = mu;
    est.sigma_hat = std::max(sigma, stats::kSigmaFloor);
  }
  est.uncertainty = est.sigma_hat / std::sqrt(static_cast<double>(std::max<std::size_t>(n_unc, 1)));
  return est;
}

}  // namespace picrl::estimator
