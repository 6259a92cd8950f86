#pragma once

namespace picrl::stats {

// Lower bound applied to every standard deviation the library consumes.
inline constexpr double kSigmaFloor = 1e-4;

// Above this z the inverse Mills ratio switches to a continued-fraction form.
inline constexpr double kMillsAsymptoticSwitch = 6.0;

// Gaussian belief over a normalized demand value.
struct GaussianBelief {
  double mean = 0.0;
  double stddev = 1.0;

  // Clamps stddev up to kSigmaFloor. Throws ValidationError on a non-finite mean.
  static GaussianBelief make(double mean, double stddev);
};

double normal_pdf(double z);
double normal_cdf(double z);
// 1 - Phi(z), computed without cancellation.
double normal_sf(double z);

// lambda(z) = phi(z) / (1 - Phi(z)).
double inverse_mills(double z);
// lambda'(z) = lambda(z) * (lambda(z) - z); lies in (0, 1).
double inverse_mills_derivative(double z);

// E[D | D <= a] for D ~ N(mu, sigma^2). Throws DegenerateTruncation when
// Phi((a - mu) / sigma) underflows to zero.
double truncated_mean_below(double mu, double sigma, double a);

}  // namespace picrl::stats
