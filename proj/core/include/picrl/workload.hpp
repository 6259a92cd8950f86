#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace picrl::workload {

// Latent demand sequence in raw units, with optional per-step context columns.
struct Trace {
  std::vector<double> demands;
  std::vector<std::vector<double>> context;  // empty, or one row per demand
  std::string dt_label = "step";

  std::size_t size() const { return demands.size(); }
  std::size_t context_width() const { return context.empty() ? 0 : context.front().size(); }
};

struct TraceStats {
  double mean = 0.0;
  double stddev = 0.0;
  double cv = 0.0;
  double pmr = 0.0;       // peak-to-mean ratio
  double autocorr = 0.0;  // sample autocorrelation at the requested lag
  std::size_t lag = 0;
};

TraceStats describe(const std::vector<double>& demands, std::size_t lag);

struct GeneratedTrace {
  Trace trace;
  TraceStats achieved;
};

struct NormalizationSpec {
  double train_min = 0.0;
  double train_max = 1.0;
  std::vector<double> context_min;
  std::vector<double> context_max;

  // Min-max scaling clipped to [0, 1].
  double apply(double raw) const;
  double invert(double normalized) const;
};

struct SplitSpec {
  double train_frac = 0.6;
  double val_frac = 0.2;
  double test_frac = 0.2;

  void validate() const;
};

// Normalized, contiguous slice of a trace.
struct Segment {
  std::vector<double> demands;
  std::vector<std::vector<double>> context;
  std::size_t offset = 0;  // index of the first element in the source trace

  std::size_t size() const { return demands.size(); }
  std::size_t context_width() const { return context.empty() ? 0 : context.front().size(); }
};

struct SplitTrace {
  Segment train;
  Segment val;
  Segment test;
  NormalizationSpec norm;
};

// Sinusoid with multiplicative Gaussian noise of the given coefficient of variation.
Trace generate_seasonal(std::size_t length, std::size_t period, double noise_cv, std::uint64_t seed);

struct BurstyOptions {
  std::size_t period = 288;  // spike-rate modulation period (quasi-periodic spikes)
  double spike_rate = 0.03;  // starting arrival rate; raised by the tuner when PMR overshoots
  double spike_decay = 0.55;
  double pmr_tolerance = 0.15;  // relative
  double cv_tolerance = 0.1;    // absolute
  int max_retries = 8;
};

// Gamma-modulated baseline plus Bernoulli-arriving lognormal spikes, tuned (spike
// rate, scale and lognormal shape) so that
// the realized PMR and CV land on the targets. Throws GenerationError when the
// targets are infeasible or not reached after the bounded retries.
GeneratedTrace generate_bursty(std::size_t length, double target_pmr, double target_cv,
                               std::uint64_t seed, const BurstyOptions& options = {});

// Scales every demand at index >= shift_at by shift_scale.
Trace generate_drift(const Trace& base, std::size_t shift_at, double shift_scale);

// iid N(mean, stddev^2) demands clipped at zero.
Trace generate_gaussian(std::size_t length, double mean, double stddev, std::uint64_t seed);

// CSV with header `t,demand[,ctx...]`.
Trace ingest_csv(const std::filesystem::path& path);
void write_csv(const Trace& trace, const std::filesystem::path& path);

SplitTrace normalize_and_split(const Trace& trace, const SplitSpec& split);

}  // namespace picrl::workload
