#include "picrl/workload.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "picrl/errors.hpp"

namespace picrl::workload {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr std::size_t kMinTraceLength = 100;

double mean_of(const std::vector<double>& xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

// Pearson correlation between x[0, n-lag) and x[lag, n).
double lagged_correlation(const std::vector<double>& xs, std::size_t lag) {
  if (lag == 0 || lag >= xs.size()) return 0.0;
  const std::size_t n = xs.size() - lag;
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += xs[i];
    mb += xs[i + lag];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = xs[i] - ma;
    const double db = xs[i + lag] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_double(std::string_view field, double& out) {
  if (field.empty()) return false;
  if (field.front() == '+') field.remove_prefix(1);
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

// Raw ingredients of one bursty realization; the trace is an explicit function of
// the spike parameters given these draws.
struct BurstyDraws {
  std::vector<double> baseline;
  std::vector<double> arrival_u;   // a spike arrives when u < rate * modulation
  std::vector<double> modulation;  // periodic rate multiplier
  std::vector<double> spike_normals;
};

BurstyDraws draw_bursty(std::size_t length, double baseline_cv, std::uint64_t seed,
                        const BurstyOptions& opt) {
  std::mt19937_64 rng(seed);
  const double shape = 1.0 / (baseline_cv * baseline_cv);
  std::gamma_distribution<double> gamma(shape, 1.0 / shape);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double phase = kTwoPi * unif(rng);

  BurstyDraws d;
  d.baseline.resize(length);
  d.arrival_u.resize(length);
  d.modulation.resize(length);
  d.spike_normals.resize(length);
  for (std::size_t t = 0; t < length; ++t) {
    const double angle = kTwoPi * static_cast<double>(t) / static_cast<double>(opt.period);
    d.baseline[t] = (1.0 + 0.2 * std::sin(angle)) * gamma(rng);
    d.modulation[t] = 1.0 + 0.8 * std::sin(angle + phase);
    d.arrival_u[t] = unif(rng);
    d.spike_normals[t] = normal(rng);
  }
  return d;
}

struct SpikeParams {
  double rate = 0.0;
  double scale = 0.0;
  double shape = 0.0;
  double decay = 0.0;
};

void realize(const BurstyDraws& d, const SpikeParams& p, std::vector<double>& out) {
  out.resize(d.baseline.size());
  double spike = 0.0;
  for (std::size_t t = 0; t < out.size(); ++t) {
    spike *= p.decay;
    if (d.arrival_u[t] < p.rate * d.modulation[t]) spike += std::exp(p.shape * d.spike_normals[t]);
    out[t] = d.baseline[t] + p.scale * spike;
  }
}

struct Moments {
  double cv;
  double pmr;
};

Moments moments(const std::vector<double>& xs) {
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  const double sd = std::sqrt(ss / static_cast<double>(xs.size()));
  const double peak = *std::max_element(xs.begin(), xs.end());
  return {sd / m, peak / m};
}

// Smallest spike scale whose realization reaches target_cv, or a negative value if
// the spike process cannot reach it.
double solve_scale_for_cv(const BurstyDraws& d, SpikeParams p, double target_cv, std::vector<double>& buf) {
  p.scale = 0.0;
  realize(d, p, buf);
  if (moments(buf).cv >= target_cv) return 0.0;
  double hi = 1.0;
  for (int i = 0;; ++i) {
    p.scale = hi;
    realize(d, p, buf);
    if (moments(buf).cv >= target_cv) break;
    if (i > 40) return -1.0;
    hi *= 2.0;
  }
  double lo = 0.0;
  for (int i = 0; i < 60; ++i) {
    p.scale = 0.5 * (lo + hi);
    realize(d, p, buf);
    (moments(buf).cv < target_cv ? lo : hi) = p.scale;
  }
  return hi;
}

}  // namespace

TraceStats describe(const std::vector<double>& demands, std::size_t lag) {
  TraceStats s;
  s.lag = lag;
  if (demands.empty()) return s;
  s.mean = mean_of(demands);
  double ss = 0.0;
  for (double x : demands) ss += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(ss / static_cast<double>(demands.size()));
  s.cv = s.mean != 0.0 ? s.stddev / s.mean : 0.0;
  s.pmr = s.mean != 0.0 ? *std::max_element(demands.begin(), demands.end()) / s.mean : 0.0;
  s.autocorr = lagged_correlation(demands, lag);
  return s;
}

double NormalizationSpec::apply(double raw) const {
  return std::clamp((raw - train_min) / (train_max - train_min), 0.0, 1.0);
}

double NormalizationSpec::invert(double normalized) const {
  return train_min + normalized * (train_max - train_min);
}

void SplitSpec::validate() const {
  if (!(train_frac > 0.0 && val_frac > 0.0 && test_frac > 0.0)) {
    throw ConfigError("split fractions must be positive");
  }
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
}

Trace generate_seasonal(std::size_t length, std::size_t period, double noise_cv, std::uint64_t seed) {
  if (period < 4) throw ConfigError("generate_seasonal: period must be >= 4");
  if (length < 2 * period) throw ConfigError("generate_seasonal: length must be >= 2*period");
  if (!(noise_cv >= 0.0)) throw ConfigError("generate_seasonal: noise_cv must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Trace trace;
  trace.demands.resize(length);
  for (std::size_t t = 0; t < length; ++t) {
    const double signal =
        100.0 * (1.0 + 0.8 * std::sin(kTwoPi * static_cast<double>(t) / static_cast<double>(period)));
    const double eps = normal(rng);
    trace.demands[t] = std::max(0.0, signal * (1.0 + noise_cv * eps));
  }
  return trace;
}

GeneratedTrace generate_bursty(std::size_t length, double target_pmr, double target_cv,
                               std::uint64_t seed, const BurstyOptions& opt) {
  if (!(target_pmr > 1.0) || !(target_cv > 0.0)) {
    throw GenerationError(fmt::format("generate_bursty: infeasible targets pmr={} cv={}", target_pmr, target_cv));
  }
  // For nonnegative data E[x^2] <= max * E[x], hence cv^2 <= pmr - 1.
  if (target_cv * target_cv > target_pmr - 1.0) {
    throw GenerationError(fmt::format("generate_bursty: cv={} unreachable with pmr={}", target_cv, target_pmr));
  }
  if (length < kMinTraceLength) throw ConfigError("generate_bursty: length must be >= 100");
  if (opt.period < 4) throw ConfigError("generate_bursty: period must be >= 4");

  const double baseline_cv = std::min(0.25, 0.5 * target_cv);
  std::vector<double> buf;
  std::seed_seq::result_type s0 = static_cast<std::uint32_t>(seed);
  std::seed_seq::result_type s1 = static_cast<std::uint32_t>(seed >> 32);

  for (int attempt = 0; attempt <= opt.max_retries; ++attempt) {
    std::seed_seq seq{s0, s1, static_cast<std::uint32_t>(attempt)};
    std::uint64_t attempt_seed = 0;
    {
      std::array<std::uint32_t, 2> words{};
      seq.generate(words.begin(), words.end());
      attempt_seed = (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
    }
    const BurstyDraws draws = draw_bursty(length, baseline_cv, attempt_seed, opt);

    // At fixed CV, PMR rises with the lognormal shape and falls with the spike rate
    // (dense spikes pile up less relative to the mean). Raise the rate from the
    // configured value until constant-size spikes sit at or below the PMR target,
    // then bisect the shape.
    for (double rate = opt.spike_rate; rate <= 0.5; rate *= 1.25) {
      SpikeParams p{rate, 0.0, 0.0, opt.spike_decay};
      auto pmr_at = [&](double shape) {
        p.shape = shape;
        p.scale = solve_scale_for_cv(draws, p, target_cv, buf);
        if (p.scale < 0.0) return std::numeric_limits<double>::quiet_NaN();
        realize(draws, p, buf);
        return moments(buf).pmr;
      };

      const double pmr0 = pmr_at(0.0);
      if (std::isnan(pmr0)) continue;
      if (pmr0 > target_pmr && rate * 1.25 <= 0.5) continue;

      double best_shape = 0.0;
      if (pmr0 < target_pmr) {
        double lo = 0.0, hi = -1.0;
        for (int i = 1; i <= 30; ++i) {
          const double pmr = pmr_at(0.05 * i);
          if (!std::isnan(pmr) && pmr >= target_pmr) {
            hi = 0.05 * i;
            break;
          }
          lo = 0.05 * i;
        }
        if (hi < 0.0) {
          best_shape = lo;
        } else {
          for (int k = 0; k < 30; ++k) {
            const double mid = 0.5 * (lo + hi);
            const double pmr = pmr_at(mid);
            if (std::isnan(pmr) || pmr < target_pmr) lo = mid; else hi = mid;
          }
          const double p_lo = pmr_at(lo);
          const double p_hi = pmr_at(hi);
          best_shape = (!std::isnan(p_lo) && std::abs(p_lo - target_pmr) < std::abs(p_hi - target_pmr)) ? lo : hi;
        }
      }

      if (std::isnan(pmr_at(best_shape))) continue;
      const Moments m = moments(buf);
      if (std::abs(m.pmr - target_pmr) <= opt.pmr_tolerance * target_pmr &&
          std::abs(m.cv - target_cv) <= opt.cv_tolerance) {
        GeneratedTrace out;
        out.trace.demands = buf;
        out.achieved = describe(out.trace.demands, opt.period);
        return out;
      }
      break;
    }
  }
  throw GenerationError(fmt::format("generate_bursty: targets pmr={} cv={} not reached after {} attempts",
                                    target_pmr, target_cv, opt.max_retries + 1));
}

Trace generate_drift(const Trace& base, std::size_t shift_at, double shift_scale) {
  if (shift_at == 0 || shift_at >= base.size()) {
    throw ConfigError("generate_drift: shift_at must lie strictly inside the trace");
  }
  if (!(shift_scale >= 0.0)) throw ConfigError("generate_drift: shift_scale must be >= 0");
  Trace out = base;
  for (std::size_t t = shift_at; t < out.size(); ++t) out.demands[t] *= shift_scale;
  return out;
}

Trace generate_gaussian(std::size_t length, double mean, double stddev, std::uint64_t seed) {
  if (!(stddev >= 0.0)) throw ConfigError("generate_gaussian: stddev must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Trace trace;
  trace.demands.resize(length);
  for (auto& d : trace.demands) d = std::max(0.0, mean + stddev * normal(rng));
  return trace;
}

Trace ingest_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open trace file: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(0, "missing header");
  const auto header = split_fields(line);
  if (header.size() < 2 || header[0] != "t" || header[1] != "demand") {
    throw ParseError(0, "header must start with t,demand");
  }
  const std::size_t width = header.size() - 2;

  Trace trace;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw ParseError(row, fmt::format("expected {} fields, found {}", header.size(), fields.size()));
    }
    long long t = 0;
    {
      const auto f = fields[0];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), t);
      if (ec != std::errc() || ptr != f.data() + f.size()) throw ParseError(row, "bad t value");
    }
    double demand = 0.0;
    if (!parse_double(fields[1], demand)) throw ParseError(row, "bad demand value");
    if (demand < 0.0) throw ValidationError(fmt::format("row {}: negative demand {}", row, demand));
    trace.demands.push_back(demand);
    if (width > 0) {
      std::vector<double> ctx(width);
      for (std::size_t j = 0; j < width; ++j) {
        if (!parse_double(fields[2 + j], ctx[j])) throw ParseError(row, "bad context value");
      }
      trace.context.push_back(std::move(ctx));
    }
  }
  return trace;
}

void write_csv(const Trace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write trace file: " + path.string());
  out << "t,demand";
  for (std::size_t j = 0; j < trace.context_width(); ++j) out << ",ctx" << (j + 1);
  out << '\n';
  for (std::size_t t = 0; t < trace.size(); ++t) {
    out << t << ',' << fmt::format("{}", trace.demands[t]);
    if (!trace.context.empty()) {
      for (double c : trace.context[t]) out << ',' << fmt::format("{}", c);
    }
    out << '\n';
  }
}

SplitTrace normalize_and_split(const Trace& trace, const SplitSpec& split) {
  split.validate();
  const std::size_t n = trace.size();
  if (n < kMinTraceLength) throw ValidationError("normalize_and_split: trace shorter than 100 steps");
  if (!trace.context.empty() && trace.context.size() != n) {
    throw ValidationError("normalize_and_split: context rows do not match demands");
  }
  const auto n_train = static_cast<std::size_t>(std::floor(n * split.train_frac + 1e-9));
  const auto n_val = static_cast<std::size_t>(std::floor(n * split.val_frac + 1e-9));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= n) {
    throw ConfigError("normalize_and_split: split leaves an empty segment");
  }

  SplitTrace out;
  const auto train_begin = trace.demands.begin();
  const auto [mn, mx] = std::minmax_element(train_begin, train_begin + static_cast<std::ptrdiff_t>(n_train));
  if (!(*mx > *mn)) throw DegenerateScaleError("normalize_and_split: constant training demand");
  out.norm.train_min = *mn;
  out.norm.train_max = *mx;

  const std::size_t width = trace.context_width();
  out.norm.context_min.assign(width, 0.0);
  out.norm.context_max.assign(width, 0.0);
  for (std::size_t j = 0; j < width; ++j) {
    double lo = trace.context[0][j], hi = lo;
    for (std::size_t t = 0; t < n_train; ++t) {
      lo = std::min(lo, trace.context[t][j]);
      hi = std::max(hi, trace.context[t][j]);
    }
    out.norm.context_min[j] = lo;
    out.norm.context_max[j] = hi;
  }

  auto fill = [&](Segment& seg, std::size_t begin, std::size_t end) {
    seg.offset = begin;
    seg.demands.reserve(end - begin);
    for (std::size_t t = begin; t < end; ++t) {
      seg.demands.push_back(out.norm.apply(trace.demands[t]));
      if (width > 0) {
        std::vector<double> row(width, 0.0);
        for (std::size_t j = 0; j < width; ++j) {
          const double span = out.norm.context_max[j] - out.norm.context_min[j];
          row[j] = span > 0.0 ? std::clamp((trace.context[t][j] - out.norm.context_min[j]) / span, 0.0, 1.0) : 0.0;
        }
        seg.context.push_back(std::move(row));
      }
    }
  };
  fill(out.train, 0, n_train);
  fill(out.val, n_train, n_train + n_val);
  fill(out.test, n_train + n_val, n);
  return out;
}

}  // namespace picrl::workload
