#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "picrl/agent.hpp"
#include "picrl/baselines.hpp"
#include "picrl/calibrator.hpp"
#include "picrl/estimator.hpp"
#include "picrl/loop.hpp"
#include "picrl/predictor.hpp"
#include "picrl/workload.hpp"

namespace picrl::experiment {

// Where the demand trace comes from. Generators are seeded by the replication seed.
struct WorkloadSpec {
  std::string kind = "bursty";  // bursty | seasonal | gaussian | csv
  std::string path;             // csv only
  std::size_t length = 5000;
  std::size_t period = 288;
  double noise_cv = 0.2;
  double pmr = 5.2;
  double cv = 0.87;
  double mean = 0.5;
  double stddev = 0.1;
  double drift_scale = 1.0;
  double drift_at = 0.5;  // fraction of the trace after which demand is scaled
  workload::SplitSpec split;
};

struct BaselineSpec {
  baselines::NaiveConfig naive;
  baselines::ConformalConfig conformal;
  baselines::ThompsonConfig thompson;
  baselines::RuleConfig rule;
};

struct ExperimentSpec {
  std::vector<std::string> policies{"picrl"};  // picrl | naive | conformal | ts | rule | oracle
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "runs";
  std::vector<std::string> ablations;  // A1..A7
  bool online_learning = true;
  bool write_checkpoints = true;
  std::size_t curve_points = 50;
  BaselineSpec baselines;
};

struct Config {
  WorkloadSpec workload;
  predictor::PredictorConfig predictor;
  estimator::EstimatorConfig estimator;
  agent::AgentConfig agent;
  controller::ControllerConfig controller;
  ExperimentSpec experiment;

  void validate() const;
  // Controller config with the experiment's ablation flags applied.
  controller::ControllerConfig resolved_controller() const;
};

nlohmann::json to_json(const Config& config);
// Overlays `j` on the defaults; unknown keys anywhere raise ConfigError.
Config config_from_json(const nlohmann::json& j);
Config load_config(const std::filesystem::path& path);
// 64-bit FNV-1a of the compact JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& j);

const std::vector<std::string>& known_policies();

// Trace for one replication.
workload::Trace make_trace(const WorkloadSpec& spec, std::uint64_t seed);

struct Metrics {
  std::size_t steps = 0;
  double mae = 0.0;
  double regret = 0.0;
  double censor_rate = 0.0;
  double over_rate = 0.0;
  std::size_t shortage_steps = 0;
  std::vector<std::pair<std::size_t, double>> regret_curve;  // (t, cumulative regret)
};

Metrics compute_metrics(const env::EpisodeLedger& ledger, std::size_t curve_points);
nlohmann::json metrics_json(const Metrics& m);

// Per-step log, columns t,d_true,a,y,c,mu,sigma,k,eta,m,b,reward,regret_cum.
void write_step_log(const std::vector<controller::StepLog>& log, const std::filesystem::path& path);
// Same with a trailing pessimism column, for diagnostics.
void write_diagnostics(const std::vector<controller::StepLog>& log, const std::filesystem::path& path);
std::vector<controller::StepLog> read_step_log(const std::filesystem::path& path);

struct PolicyRun {
  std::string policy;
  std::uint64_t seed = 0;
  Metrics metrics;
  controller::EpisodeResult episode;
};

// Trained components of one replication, reusable across policies and ablations.
struct Prepared {
  std::uint64_t seed = 0;
  workload::SplitTrace split;
  workload::TraceStats trace_stats;
  std::optional<predictor::PredictorModel> model;
};

Prepared prepare(const Config& config, std::uint64_t seed);
Prepared prepare(const Config& config, std::uint64_t seed, const predictor::PredictorModel& model);

struct PicrlArtifacts {
  controller::PretrainResult pretrain;
  std::vector<agent::UpdateStats> updates;
  nlohmann::json policy_checkpoint;
  nlohmann::json value_checkpoint;
};

// Offline pretraining on the training segment (skipped under A7 or zero epochs).
agent::Agent pretrain_picrl(const Config& config, const Prepared& prepared,
                            controller::PretrainResult* result = nullptr);
// Online loop on the test segment with the validation segment as history.
PolicyRun run_picrl_online(const Config& config, const Prepared& prepared, agent::Agent& learner,
                           PicrlArtifacts* artifacts = nullptr);
// Full PIC-RL on the test segment: optional offline pretraining on the training
// segment, then the online loop with the validation segment as history.
PolicyRun run_picrl(const Config& config, const Prepared& prepared, PicrlArtifacts* artifacts = nullptr);
PolicyRun run_policy(const Config& config, const Prepared& prepared, const std::string& policy);

// Runs every policy for every seed, writes logs, checkpoints and summary.json into
// the output directory, and returns the summary document.
nlohmann::json run_pipeline(const Config& config);

// Aggregates per-seed metrics by policy (means over seeds).
nlohmann::json summarize_runs(const Config& config, const std::vector<PolicyRun>& runs);

// PICRL_SEED, when set, replaces the seed list with that single seed.
void apply_seed_override(Config& config);

}  // namespace picrl::experiment
