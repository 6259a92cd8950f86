#include "picrl/stats.hpp"

#include <algorithm>
#include <cmath>

#include "picrl/errors.hpp"

namespace picrl::stats {

namespace {

constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;
constexpr double kInvSqrt2 = 0.707106781186547524400844362105;

// Mills ratio R(z) = (1 - Phi(z)) / phi(z) by backward evaluation of
// R = 1/(z + 1/(z + 2/(z + 3/(z + ...)))). Converges quickly for z > 6.
double mills_ratio_cf(double z) {
  constexpr int kTerms = 80;
  double tail = z;
  for (int k = kTerms; k >= 1; --k) tail = z + k / tail;
  return 1.0 / tail;
}

}  // namespace

GaussianBelief GaussianBelief::make(double mean, double stddev) {
  if (!std::isfinite(mean)) throw ValidationError("GaussianBelief: non-finite mean");
  if (std::isnan(stddev)) throw ValidationError("GaussianBelief: NaN stddev");
  return GaussianBelief{mean, std::max(stddev, kSigmaFloor)};
}

double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }

double normal_sf(double z) { return 0.5 * std::erfc(z * kInvSqrt2); }

double inverse_mills(double z) {
  if (z > kMillsAsymptoticSwitch) return 1.0 / mills_ratio_cf(z);
  return normal_pdf(z) / normal_sf(z);
}

double inverse_mills_derivative(double z) {
  const double lambda = inverse_mills(z);
  return lambda * (lambda - z);
}

double truncated_mean_below(double mu, double sigma, double a) {
  if (!(sigma > 0.0)) throw ValidationError("truncated_mean_below: sigma must be positive");
  const double alpha = (a - mu) / sigma;
  if (normal_cdf(alpha) <= 0.0) {
    throw DegenerateTruncation("truncated_mean_below: Phi(alpha) underflows");
  }
  // phi(alpha) / Phi(alpha) == lambda(-alpha)
  return mu - sigma * inverse_mills(-alpha);
}

}  // namespace picrl::stats
