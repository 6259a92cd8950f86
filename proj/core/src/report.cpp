#include "picrl/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "picrl/errors.hpp"
#include "picrl/experiment.hpp"

namespace picrl::report {

namespace {

using nlohmann::json;

json read_summary(const std::filesystem::path& path) {
  std::ifstream in(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ReportError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void accumulate(PolicySeries& s, const std::vector<controller::StepLog>& log) {
  if (log.empty()) return;
  double abs_err = 0.0, censored = 0.0, over = 0.0;
  if (s.regret_curve.size() < log.size()) s.regret_curve.resize(log.size(), 0.0);
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto& r = log[i];
    abs_err += std::abs(r.a - r.d_true);
    censored += r.c ? 1.0 : 0.0;
    over += r.a > r.d_true ? 1.0 : 0.0;
    s.regret_curve[i] += r.regret_cum;
    s.errors.push_back(r.a - r.d_true);
  }
  const auto n = static_cast<double>(log.size());
  s.mae += abs_err / n;
  s.regret += log.back().regret_cum;
  s.censor_rate += censored / n;
  s.over_rate += over / n;
  ++s.seeds;
}

}  // namespace

std::vector<PolicySeries> collect(const std::vector<std::filesystem::path>& run_dirs) {
  if (run_dirs.empty()) throw ReportError("no run directories given");
  std::vector<std::string> gaps;
  std::vector<PolicySeries> out;
  std::set<std::string> labels;

  for (const auto& dir : run_dirs) {
    const auto summary_path = dir / "summary.json";
    if (!std::filesystem::exists(summary_path)) {
      gaps.push_back(summary_path.string());
      continue;
    }
    const json summary = read_summary(summary_path);
    if (!summary.contains("policy_order") || !summary.contains("seeds")) {
      gaps.push_back(summary_path.string() + " (policy_order/seeds)");
      continue;
    }
    for (const auto& p : summary.at("policy_order")) {
      const auto policy = p.get<std::string>();
      PolicySeries s;
      s.policy = labels.count(policy) ? dir.filename().string() + ":" + policy : policy;
      for (const auto& seed : summary.at("seeds")) {
        const auto log_path = dir / fmt::format("{}_seed{}.csv", policy, seed.get<std::uint64_t>());
        if (!std::filesystem::exists(log_path)) {
          gaps.push_back(log_path.string());
          continue;
        }
        accumulate(s, experiment::read_step_log(log_path));
      }
      if (s.seeds == 0) continue;
      const auto n = static_cast<double>(s.seeds);
      s.mae /= n;
      s.regret /= n;
      s.censor_rate /= n;
      s.over_rate /= n;
      for (auto& v : s.regret_curve) v /= n;
      labels.insert(s.policy);
      out.push_back(std::move(s));
    }
  }
  if (!gaps.empty()) {
    std::string msg = "missing run artifacts:";
    for (const auto& g : gaps) msg += "\n  " + g;
    throw ReportError(msg);
  }
  if (out.empty()) throw ReportError("no completed runs found");
  return out;
}

void write(const std::vector<PolicySeries>& series, const std::filesystem::path& out, const ReportOptions& options) {
  if (!(options.bin_width > 0.0 && options.bin_width <= 2.0)) throw ConfigError("bin_width must lie in (0, 2]");
  std::filesystem::create_directories(out);

  std::ofstream table(out / "summary_table.csv");
  table << "policy,seeds,mae,regret,censor_rate,over_rate\n";
  for (const auto& s : series) {
    table << fmt::format("{},{},{},{},{},{}\n", s.policy, s.seeds, s.mae, s.regret, s.censor_rate, s.over_rate);
  }

  std::ofstream curve(out / "regret_curve.csv");
  curve << "policy,t,regret_cum\n";
  for (const auto& s : series) {
    for (std::size_t t = 0; t < s.regret_curve.size(); ++t) {
      curve << fmt::format("{},{},{}\n", s.policy, t, s.regret_curve[t]);
    }
  }

  const auto bins = static_cast<std::size_t>(std::ceil(2.0 / options.bin_width - 1e-9));
  std::ofstream hist(out / "error_hist.csv");
  hist << "policy,bin_lo,bin_hi,count\n";
  for (const auto& s : series) {
    std::vector<std::size_t> counts(bins, 0);
    for (const double e : s.errors) {
      const auto idx = static_cast<long>(std::floor((e + 1.0) / options.bin_width));
      counts[static_cast<std::size_t>(std::clamp<long>(idx, 0, static_cast<long>(bins) - 1))]++;
    }
    for (std::size_t b = 0; b < bins; ++b) {
      const double lo = -1.0 + static_cast<double>(b) * options.bin_width;
      hist << fmt::format("{},{:.6g},{:.6g},{}\n", s.policy, lo, std::min(1.0, lo + options.bin_width), counts[b]);
    }
  }
  if (!table || !curve || !hist) throw ReportError("failed writing report files to " + out.string());
}

}  // namespace picrl::report
