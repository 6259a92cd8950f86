#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace picrl::report {

struct PolicySeries {
  std::string policy;
  std::size_t seeds = 0;
  double mae = 0.0;          // mean over seeds
  double regret = 0.0;       // mean final cumulative regret
  double censor_rate = 0.0;  // mean fraction of censored steps
  double over_rate = 0.0;
  std::vector<double> regret_curve;  // seed-averaged cumulative regret per step
  std::vector<double> errors;        // a - d for every step of every seed
};

struct ReportOptions {
  double bin_width = 0.05;  // error histogram bins cover [-1, 1]
};

// Reads summary.json and the per-seed step logs of every run directory.
// Missing artifacts raise ReportError naming each gap.
std::vector<PolicySeries> collect(const std::vector<std::filesystem::path>& run_dirs);

// Writes summary_table.csv, regret_curve.csv and error_hist.csv into `out`.
void write(const std::vector<PolicySeries>& series, const std::filesystem::path& out,
           const ReportOptions& options = {});

}  // namespace picrl::report
