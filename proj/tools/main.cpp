// picrl: trace generation, training, online runs, ablations, verification and reports.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "picrl/agent.hpp"
#include "picrl/errors.hpp"
#include "picrl/experiment.hpp"
#include "picrl/report.hpp"
#include "picrl/verify.hpp"
#include "picrl/workload.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace picrl;

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kUsage = 2;
constexpr int kVerifyFail = 3;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_path, "experiment config JSON (defaults when omitted)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "replication seed (overrides PICRL_SEED and the config)");
}

// Seed precedence: --seed, then PICRL_SEED, then the config's seed list.
experiment::Config resolve(const Common& c) {
  auto config = c.config_path.empty() ? experiment::Config{} : experiment::load_config(c.config_path);
  experiment::apply_seed_override(config);
  if (c.seed) config.experiment.seeds = {*c.seed};
  config.validate();
  return config;
}

void print_json(const json& j) { std::printf("%s\n", j.dump(2).c_str()); }

fs::path sidecar_path(const fs::path& csv) {
  auto p = csv;
  p.replace_extension(".stats.json");
  return p;
}

json stats_json(const workload::TraceStats& s) {
  return {{"mean", s.mean}, {"stddev", s.stddev}, {"cv", s.cv}, {"pmr", s.pmr}, {"autocorr", s.autocorr}, {"lag", s.lag}};
}

struct GenTraceArgs {
  std::string kind;
  std::string out;
  std::size_t length = 5000;
  std::uint64_t seed = 1;
  double pmr = 5.2;
  double cv = 0.87;
  std::size_t period = 288;
  double noise_cv = 0.2;
  double mean = 0.5;
  double stddev = 0.1;
  double drift_scale = 1.0;
  double drift_at = 0.5;
  std::size_t lag = 1;
};

int cmd_gen_trace(const GenTraceArgs& a) {
  experiment::WorkloadSpec spec;
  spec.kind = a.kind;
  spec.length = a.length;
  spec.pmr = a.pmr;
  spec.cv = a.cv;
  spec.period = a.period;
  spec.noise_cv = a.noise_cv;
  spec.mean = a.mean;
  spec.stddev = a.stddev;
  spec.drift_scale = a.drift_scale;
  spec.drift_at = a.drift_at;
  const auto trace = experiment::make_trace(spec, a.seed);
  workload::write_csv(trace, a.out);
  json side = stats_json(workload::describe(trace.demands, a.lag));
  side["kind"] = a.kind;
  side["length"] = trace.size();
  side["seed"] = a.seed;
  if (a.kind == "bursty") side["targets"] = {{"pmr", a.pmr}, {"cv", a.cv}};
  agent::write_json(sidecar_path(a.out), side);
  print_json(side);
  return kOk;
}

int cmd_defaults(const std::string& out) {
  const json j = experiment::to_json(experiment::Config{});
  if (out.empty()) {
    print_json(j);
  } else {
    agent::write_json(out, j);
  }
  return kOk;
}

int cmd_train_predictor(const Common& c, const std::string& out) {
  const auto config = resolve(c);
  const auto seed = config.experiment.seeds.front();
  const auto prepared = experiment::prepare(config, seed);
  prepared.model->save(out);
  const auto& h = prepared.model->history;
  print_json({{"seed", seed},
              {"best_epoch", h.best_epoch},
              {"best_val_nll", h.best_val_nll},
              {"best_val_mae", h.best_val_mae},
              {"trace", stats_json(prepared.trace_stats)}});
  return kOk;
}

experiment::Prepared prepare_with(const experiment::Config& config, const std::string& predictor_path) {
  const auto seed = config.experiment.seeds.front();
  if (predictor_path.empty()) return experiment::prepare(config, seed);
  return experiment::prepare(config, seed, predictor::PredictorModel::load(predictor_path));
}

int cmd_pretrain_policy(const Common& c, const std::string& predictor_path, const std::string& out) {
  const auto config = resolve(c);
  const auto prepared = prepare_with(config, predictor_path);
  controller::PretrainResult pre;
  const auto learner = experiment::pretrain_picrl(config, prepared, &pre);
  fs::create_directories(out);
  agent::write_json(fs::path(out) / "policy.json", agent::network_checkpoint("policy", learner.policy.network()));
  agent::write_json(fs::path(out) / "value.json", agent::network_checkpoint("value", learner.value.network()));
  const json losses{{"seed", prepared.seed},
                    {"value_loss", pre.value_loss},
                    {"train_value_loss", pre.train_value_loss},
                    {"policy_loss", pre.policy_loss}};
  agent::write_json(fs::path(out) / "pretrain.json", losses);
  std::printf("pretrained %zu epochs, checkpoints in %s\n", pre.value_loss.size(), out.c_str());
  return kOk;
}

struct OnlineArgs {
  std::string predictor;
  std::string checkpoints;
  std::string policy = "picrl";
  std::string out;
};

int cmd_run_online(const Common& c, const OnlineArgs& a) {
  const auto config = resolve(c);
  const auto prepared = prepare_with(config, a.predictor);
  experiment::PolicyRun run;
  if (a.policy == "picrl") {
    auto learner = [&] {
      if (a.checkpoints.empty()) return experiment::pretrain_picrl(config, prepared);
      agent::Agent loaded(config.agent, prepared.seed);
      loaded.load_networks(agent::read_json(fs::path(a.checkpoints) / "policy.json"),
                           agent::read_json(fs::path(a.checkpoints) / "value.json"));
      return loaded;
    }();
    run = experiment::run_picrl_online(config, prepared, learner);
  } else {
    run = experiment::run_policy(config, prepared, a.policy);
  }
  experiment::write_step_log(run.episode.log, a.out);
  json j = experiment::metrics_json(run.metrics);
  j["policy"] = run.policy;
  j["seed"] = run.seed;
  j.erase("regret_curve");
  print_json(j);
  return kOk;
}

int cmd_pipeline(const Common& c, const std::vector<std::string>& ablate, const std::vector<std::string>& policies,
                 const std::string& out) {
  auto config = resolve(c);
  if (!ablate.empty()) config.experiment.ablations = ablate;
  if (!policies.empty()) config.experiment.policies = policies;
  if (!out.empty()) config.experiment.output_dir = out;
  config.validate();
  const json summary = experiment::run_pipeline(config);
  const auto& pol = summary.at("policies");
  std::printf("%-16s %10s %10s %10s %10s\n", "policy", "MAE", "Regret", "censor", "over");
  for (const auto& name : summary.at("policy_order")) {
    const auto& agg = pol.at(name.get<std::string>()).at("aggregate");
    std::printf("%-16s %10.4f %10.3f %10.4f %10.4f\n", name.get<std::string>().c_str(), agg.at("mae").get<double>(),
                agg.at("regret").get<double>(), agg.at("censor_rate").get<double>(),
                agg.at("over_rate").get<double>());
  }
  std::printf("summary: %s\n", (fs::path(config.experiment.output_dir) / "summary.json").c_str());
  return kOk;
}

int cmd_ablate(const Common& c, std::vector<std::string> codes, const std::string& out) {
  auto config = resolve(c);
  if (codes.empty()) codes = {"A1", "A2", "A3", "A4", "A5", "A6", "A7"};
  const fs::path dir = out.empty() ? fs::path(config.experiment.output_dir) / "ablations" : fs::path(out);
  fs::create_directories(dir);

  std::vector<std::string> variants{""};
  variants.insert(variants.end(), codes.begin(), codes.end());
  json rows = json::array();
  std::vector<experiment::PolicyRun> runs;
  for (const auto seed : config.experiment.seeds) {
    const auto prepared = experiment::prepare(config, seed);
    for (const auto& code : variants) {
      auto variant = config;
      variant.experiment.ablations = code.empty() ? std::vector<std::string>{} : std::vector<std::string>{code};
      variant.validate();
      auto run = experiment::run_picrl(variant, prepared);
      experiment::write_step_log(run.episode.log, dir / fmt::format("{}_seed{}.csv", run.policy, seed));
      run.episode.log.clear();
      runs.push_back(std::move(run));
    }
  }

  std::printf("%-12s %10s %10s %10s %12s\n", "variant", "MAE", "Regret", "censor", "dMAE vs full");
  std::map<std::string, std::pair<double, double>> mean_mae_regret;
  std::map<std::string, double> censor;
  for (const auto& r : runs) {
    const auto n = static_cast<double>(config.experiment.seeds.size());
    mean_mae_regret[r.policy].first += r.metrics.mae / n;
    mean_mae_regret[r.policy].second += r.metrics.regret / n;
    censor[r.policy] += r.metrics.censor_rate / n;
  }
  const double full_mae = mean_mae_regret.at("picrl").first;
  for (const auto& code : variants) {
    const std::string label = code.empty() ? "picrl" : "picrl-" + code;
    const auto [mae, regret] = mean_mae_regret.at(label);
    const double rel = (mae - full_mae) / full_mae;
    std::printf("%-12s %10.4f %10.3f %10.4f %+11.1f%%\n", label.c_str(), mae, regret, censor.at(label), 100.0 * rel);
    rows.push_back({{"variant", label}, {"mae", mae}, {"regret", regret}, {"censor_rate", censor.at(label)},
                    {"mae_change_vs_full", rel}});
  }
  json summary{{"format", "picrl.ablation"},
               {"version", 1},
               {"seeds", config.experiment.seeds},
               {"config_hash", experiment::config_hash(experiment::to_json(config))},
               {"variants", rows}};
  agent::write_json(dir / "ablation_summary.json", summary);
  return kOk;
}

int cmd_verify(const std::string& which, const std::string& json_out) {
  std::vector<std::string> names = which == "all" ? verify::suites() : std::vector<std::string>{which};
  json verdicts = json::array();
  bool pass = true;
  for (const auto& name : names) {
    const auto v = verify::run(name);
    std::printf("%s\n", v.table().c_str());
    verdicts.push_back(v.to_json());
    pass = pass && v.pass();
  }
  const json doc{{"format", "picrl.verdict"}, {"version", 1}, {"pass", pass}, {"suites", verdicts}};
  if (!json_out.empty()) agent::write_json(json_out, doc);
  return pass ? kOk : kVerifyFail;
}

int cmd_report(const std::vector<std::string>& dirs, const std::string& out) {
  std::vector<fs::path> paths(dirs.begin(), dirs.end());
  const auto series = report::collect(paths);
  report::write(series, out);
  std::printf("%-16s %6s %10s %10s %10s\n", "policy", "seeds", "MAE", "Regret", "censor");
  for (const auto& s : series) {
    std::printf("%-16s %6zu %10.4f %10.3f %10.4f\n", s.policy.c_str(), s.seeds, s.mae, s.regret, s.censor_rate);
  }
  std::printf("wrote summary_table.csv, regret_curve.csv, error_hist.csv to %s\n", out.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"picrl: provisioning under prediction-induced censoring"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "picrl 0.1.0");

  GenTraceArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-trace", "generate a synthetic demand trace (CSV + stats sidecar)");
  gen_cmd->add_option("kind", gen.kind, "bursty | seasonal | gaussian")
      ->required()
      ->check(CLI::IsMember({"bursty", "seasonal", "gaussian"}));
  gen_cmd->add_option("-o,--out", gen.out, "output CSV")->required();
  gen_cmd->add_option("--len", gen.length, "number of steps")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.seed, "generator seed");
  gen_cmd->add_option("--pmr", gen.pmr, "bursty: target peak-to-mean ratio");
  gen_cmd->add_option("--cv", gen.cv, "bursty: target coefficient of variation");
  gen_cmd->add_option("--period", gen.period, "seasonal period / bursty modulation period");
  gen_cmd->add_option("--noise-cv", gen.noise_cv, "seasonal: noise coefficient of variation");
  gen_cmd->add_option("--mean", gen.mean, "gaussian: mean");
  gen_cmd->add_option("--std", gen.stddev, "gaussian: standard deviation");
  gen_cmd->add_option("--drift-scale", gen.drift_scale, "demand multiplier after the drift point");
  gen_cmd->add_option("--drift-at", gen.drift_at, "drift point as a fraction of the trace")->check(CLI::Range(0.0, 1.0));
  gen_cmd->add_option("--lag", gen.lag, "autocorrelation lag reported in the sidecar");

  std::string defaults_out;
  auto* defaults_cmd = app.add_subcommand("defaults", "emit the fully resolved default config");
  defaults_cmd->add_option("-o,--out", defaults_out, "output JSON (stdout when omitted)");

  Common train_c;
  std::string train_out;
  auto* train_cmd = app.add_subcommand("train-predictor", "train the probabilistic forecaster");
  add_common(train_cmd, train_c);
  train_cmd->add_option("-o,--out", train_out, "model JSON")->required();

  Common pre_c;
  std::string pre_predictor, pre_out;
  auto* pre_cmd = app.add_subcommand("pretrain-policy", "offline actor-critic pretraining");
  add_common(pre_cmd, pre_c);
  pre_cmd->add_option("--predictor", pre_predictor, "trained predictor JSON (trained afresh when omitted)")
      ->check(CLI::ExistingFile);
  pre_cmd->add_option("-o,--out", pre_out, "checkpoint directory")->required();

  Common run_c;
  OnlineArgs online;
  auto* run_cmd = app.add_subcommand("run-online", "run one policy over the test segment");
  add_common(run_cmd, run_c);
  run_cmd->add_option("--predictor", online.predictor, "trained predictor JSON")->check(CLI::ExistingFile);
  run_cmd->add_option("--checkpoints", online.checkpoints, "directory with policy.json and value.json")
      ->check(CLI::ExistingDirectory);
  run_cmd->add_option("--policy", online.policy, "policy")->check(CLI::IsMember(experiment::known_policies()));
  run_cmd->add_option("-o,--out", online.out, "per-step log CSV")->required();

  Common pipe_c;
  std::vector<std::string> pipe_ablate, pipe_policies;
  std::string pipe_out;
  auto* pipe_cmd = app.add_subcommand("pipeline", "train, pretrain and run every policy for every seed");
  add_common(pipe_cmd, pipe_c);
  pipe_cmd->add_option("--ablate", pipe_ablate, "ablation codes A1..A7 (repeatable)")->delimiter(',');
  pipe_cmd->add_option("--policy", pipe_policies, "policies to run (repeatable)")
      ->delimiter(',')
      ->check(CLI::IsMember(experiment::known_policies()));
  pipe_cmd->add_option("-o,--out", pipe_out, "output directory (overrides the config)");

  Common abl_c;
  std::vector<std::string> abl_codes;
  std::string abl_out;
  auto* abl_cmd = app.add_subcommand("ablate", "compare full PIC-RL against single-component ablations");
  add_common(abl_cmd, abl_c);
  abl_cmd->add_option("--codes", abl_codes, "ablation codes (default A1..A7)")->delimiter(',');
  abl_cmd->add_option("-o,--out", abl_out, "output directory");

  std::string verify_which, verify_json;
  auto* verify_cmd = app.add_subcommand("verify", "run a theory-verification suite");
  std::vector<std::string> suite_names = verify::suites();
  suite_names.push_back("all");
  verify_cmd->add_option("suite", verify_which, "prop1 | prop2 | equilibrium | stability | all")
      ->required()
      ->check(CLI::IsMember(suite_names));
  verify_cmd->add_option("--json", verify_json, "write the verdict JSON here");

  std::vector<std::string> report_dirs;
  std::string report_out = ".";
  auto* report_cmd = app.add_subcommand("report", "comparison table and plot-data CSVs from run directories");
  report_cmd->add_option("runs", report_dirs, "run directories")->required();
  report_cmd->add_option("-o,--out", report_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen_cmd) return cmd_gen_trace(gen);
    if (*defaults_cmd) return cmd_defaults(defaults_out);
    if (*train_cmd) return cmd_train_predictor(train_c, train_out);
    if (*pre_cmd) return cmd_pretrain_policy(pre_c, pre_predictor, pre_out);
    if (*run_cmd) return cmd_run_online(run_c, online);
    if (*pipe_cmd) return cmd_pipeline(pipe_c, pipe_ablate, pipe_policies, pipe_out);
    if (*abl_cmd) return cmd_ablate(abl_c, abl_codes, abl_out);
    if (*verify_cmd) return cmd_verify(verify_which, verify_json);
    if (*report_cmd) return cmd_report(report_dirs, report_out);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "picrl: config error: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "picrl: %s\n", e.what());
    return kRuntime;
  }
  return kUsage;
}
