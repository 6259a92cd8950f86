#include "picrl/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "picrl/errors.hpp"

namespace picrl::experiment {

using nlohmann::json;

namespace {

json overlay(const json& defaults, const json& user, const std::string& path) {
  if (!defaults.is_object()) return user;
  if (!user.is_object()) throw ConfigError("config section '" + path + "' must be an object");
  json out = defaults;
  for (const auto& [key, value] : user.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!defaults.contains(key)) throw ConfigError("unknown config key '" + where + "'");
    out[key] = overlay(defaults.at(key), value, where);
  }
  return out;
}

json workload_json(const WorkloadSpec& w) {
  return json{{"kind", w.kind},         {"path", w.path},
              {"length", w.length},     {"period", w.period},
              {"noise_cv", w.noise_cv}, {"pmr", w.pmr},
              {"cv", w.cv},             {"mean", w.mean},
              {"stddev", w.stddev},     {"drift_scale", w.drift_scale},
              {"drift_at", w.drift_at},
              {"split", {{"train", w.split.train_frac}, {"val", w.split.val_frac}, {"test", w.split.test_frac}}}};
}

WorkloadSpec workload_from(const json& j) {
  WorkloadSpec w;
  j.at("kind").get_to(w.kind);
  j.at("path").get_to(w.path);
  j.at("length").get_to(w.length);
  j.at("period").get_to(w.period);
  j.at("noise_cv").get_to(w.noise_cv);
  j.at("pmr").get_to(w.pmr);
  j.at("cv").get_to(w.cv);
  j.at("mean").get_to(w.mean);
  j.at("stddev").get_to(w.stddev);
  j.at("drift_scale").get_to(w.drift_scale);
  j.at("drift_at").get_to(w.drift_at);
  j.at("split").at("train").get_to(w.split.train_frac);
  j.at("split").at("val").get_to(w.split.val_frac);
  j.at("split").at("test").get_to(w.split.test_frac);
  return w;
}

json experiment_json(const ExperimentSpec& e) {
  const auto& b = e.baselines;
  return json{{"policies", e.policies},
              {"seeds", e.seeds},
              {"output_dir", e.output_dir},
              {"ablations", e.ablations},
              {"online_learning", e.online_learning},
              {"write_checkpoints", e.write_checkpoints},
              {"curve_points", e.curve_points},
              {"baselines",
               {{"naive", {{"rho", b.naive.rho}, {"gamma", b.naive.gamma}, {"recent", b.naive.recent}}},
                {"conformal", {{"q", b.conformal.q}, {"capacity", b.conformal.capacity}, {"warm", b.conformal.warm}}},
                {"thompson", {{"q", b.thompson.q}, {"min_obs_sd", b.thompson.min_obs_sd}}},
                {"rule", {{"window", b.rule.window}, {"headroom", b.rule.headroom}}}}}};
}

ExperimentSpec experiment_from(const json& j) {
  ExperimentSpec e;
  j.at("policies").get_to(e.policies);
  j.at("seeds").get_to(e.seeds);
  j.at("output_dir").get_to(e.output_dir);
  j.at("ablations").get_to(e.ablations);
  j.at("online_learning").get_to(e.online_learning);
  j.at("write_checkpoints").get_to(e.write_checkpoints);
  j.at("curve_points").get_to(e.curve_points);
  const auto& b = j.at("baselines");
  b.at("naive").at("rho").get_to(e.baselines.naive.rho);
  b.at("naive").at("gamma").get_to(e.baselines.naive.gamma);
  b.at("naive").at("recent").get_to(e.baselines.naive.recent);
  b.at("conformal").at("q").get_to(e.baselines.conformal.q);
  b.at("conformal").at("capacity").get_to(e.baselines.conformal.capacity);
  b.at("conformal").at("warm").get_to(e.baselines.conformal.warm);
  b.at("thompson").at("q").get_to(e.baselines.thompson.q);
  b.at("thompson").at("min_obs_sd").get_to(e.baselines.thompson.min_obs_sd);
  b.at("rule").at("window").get_to(e.baselines.rule.window);
  b.at("rule").at("headroom").get_to(e.baselines.rule.headroom);
  return e;
}

std::string policy_label(const Config& config, const std::string& policy) {
  if (policy != "picrl" || config.experiment.ablations.empty()) return policy;
  std::string label = policy;
  for (const auto& a : config.experiment.ablations) label += "-" + a;
  return label;
}

std::unique_ptr<baselines::Baseline> make_baseline(const Config& config, const std::string& policy,
                                                   std::uint64_t seed) {
  const auto& b = config.experiment.baselines;
  if (policy == "naive") return std::make_unique<baselines::NaiveMixtureLearner>(b.naive);
  if (policy == "conformal") return std::make_unique<baselines::ConformalCalibrator>(b.conformal);
  if (policy == "ts") {
    auto ts = b.thompson;
    ts.seed = seed;
    return std::make_unique<baselines::ThompsonSampler>(ts);
  }
  if (policy == "rule") return std::make_unique<baselines::RuleAutoscaler>(b.rule);
  throw ConfigError("unknown policy '" + policy + "'");
}

}  // namespace

const std::vector<std::string>& known_policies() {
  static const std::vector<std::string> names{"picrl", "naive", "conformal", "ts", "rule", "oracle"};
  return names;
}

void Config::validate() const {
  static const std::vector<std::string> kinds{"bursty", "seasonal", "gaussian", "csv"};
  if (std::find(kinds.begin(), kinds.end(), workload.kind) == kinds.end()) {
    throw ConfigError("workload.kind must be one of bursty, seasonal, gaussian, csv");
  }
  if (workload.kind == "csv" && workload.path.empty()) throw ConfigError("workload.path is required for csv");
  if (!(workload.drift_scale > 0.0)) throw ConfigError("workload.drift_scale must be > 0");
  if (!(workload.drift_at > 0.0 && workload.drift_at < 1.0)) throw ConfigError("workload.drift_at must lie in (0, 1)");
  workload.split.validate();
  predictor.validate();
  estimator.validate();
  agent.validate();
  resolved_controller().validate();
  if (experiment.policies.empty()) throw ConfigError("experiment.policies is empty");
  for (const auto& p : experiment.policies) {
    if (std::find(known_policies().begin(), known_policies().end(), p) == known_policies().end()) {
      throw ConfigError("unknown policy '" + p + "'");
    }
  }
  if (experiment.seeds.empty()) throw ConfigError("experiment.seeds is empty");
  if (experiment.curve_points < 2) throw ConfigError("experiment.curve_points must be >= 2");
}

controller::ControllerConfig Config::resolved_controller() const {
  auto c = controller;
  for (const auto& code : experiment.ablations) c.ablations.enable(code);
  return c;
}

json to_json(const Config& c) {
  json j;
  j["workload"] = workload_json(c.workload);
  j["predictor"] = c.predictor;
  j["estimator"] = c.estimator;
  j["agent"] = c.agent;
  j["controller"] = c.controller;
  j["experiment"] = experiment_json(c.experiment);
  return j;
}

Config config_from_json(const json& user) {
  const json merged = overlay(to_json(Config{}), user, "");
  Config c;
  try {
    c.workload = workload_from(merged.at("workload"));
    c.predictor = merged.at("predictor").get<predictor::PredictorConfig>();
    c.estimator = merged.at("estimator").get<estimator::EstimatorConfig>();
    c.agent = merged.at("agent").get<agent::AgentConfig>();
    c.controller = merged.at("controller").get<controller::ControllerConfig>();
    c.experiment = experiment_from(merged.at("experiment"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config type error: ") + e.what());
  }
  c.validate();
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  return config_from_json(j);
}

std::string config_hash(const json& j) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return fmt::format("{:016x}", h);
}

void apply_seed_override(Config& config) {
  const char* env = std::getenv("PICRL_SEED");
  if (!env || !*env) return;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (*end != '\0') throw ConfigError(std::string("PICRL_SEED is not an unsigned integer: ") + env);
  config.experiment.seeds = {static_cast<std::uint64_t>(v)};
}

workload::Trace make_trace(const WorkloadSpec& spec, std::uint64_t seed) {
  workload::Trace trace;
  if (spec.kind == "bursty") {
    trace = workload::generate_bursty(spec.length, spec.pmr, spec.cv, seed).trace;
  } else if (spec.kind == "seasonal") {
    trace = workload::generate_seasonal(spec.length, spec.period, spec.noise_cv, seed);
  } else if (spec.kind == "gaussian") {
    trace = workload::generate_gaussian(spec.length, spec.mean, spec.stddev, seed);
  } else if (spec.kind == "csv") {
    trace = workload::ingest_csv(spec.path);
  } else {
    throw ConfigError("unknown workload kind '" + spec.kind + "'");
  }
  if (spec.drift_scale != 1.0) {
    const auto at = static_cast<std::size_t>(std::floor(spec.drift_at * static_cast<double>(trace.demands.size())));
    trace = workload::generate_drift(trace, at, spec.drift_scale);
  }
  return trace;
}

Metrics compute_metrics(const env::EpisodeLedger& ledger, std::size_t curve_points) {
  Metrics m;
  m.steps = ledger.size();
  if (ledger.empty()) return m;
  m.mae = env::mae(ledger);
  m.regret = env::regret(ledger);
  m.censor_rate = env::censoring_rate(ledger);
  m.over_rate = env::over_provision_rate(ledger);
  m.shortage_steps = ledger.censored_count();
  const auto& recs = ledger.records();
  const std::size_t n = recs.size();
  const std::size_t points = std::min(curve_points, n);
  double cum = 0.0;
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    cum += recs[i].cost;
    const std::size_t target = (next + 1) * n / points;
    if (i + 1 == target) {
      m.regret_curve.emplace_back(i + 1, cum);
      ++next;
    }
  }
  return m;
}

json metrics_json(const Metrics& m) {
  json curve = json::array();
  for (const auto& [t, r] : m.regret_curve) curve.push_back({t, r});
  return json{{"steps", m.steps},          {"mae", m.mae},
              {"regret", m.regret},        {"censor_rate", m.censor_rate},
              {"over_rate", m.over_rate},  {"shortage_steps", m.shortage_steps},
              {"regret_curve", curve}};
}

void write_step_log(const std::vector<controller::StepLog>& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "t,d_true,a,y,c,mu,sigma,k,eta,m,b,reward,regret_cum\n";
  for (const auto& r : log) {
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.t, r.d_true, r.a, r.y, r.c ? 1 : 0, r.mu,
                       r.sigma, r.k, r.eta, r.m, r.b, r.reward, r.regret_cum);
  }
}

void write_diagnostics(const std::vector<controller::StepLog>& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "t,d_true,a,y,c,mu,sigma,k,eta,m,b,reward,regret_cum,pessimism\n";
  for (const auto& r : log) {
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.t, r.d_true, r.a, r.y, r.c ? 1 : 0, r.mu,
                       r.sigma, r.k, r.eta, r.m, r.b, r.reward, r.regret_cum, r.pessimism);
  }
}

std::vector<controller::StepLog> read_step_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ReportError("missing step log " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("t,d_true,a,y,c,mu,sigma,k,eta,m,b,reward,regret_cum", 0) != 0) {
    throw ReportError("unexpected step-log header in " + path.string());
  }
  std::vector<controller::StepLog> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        v.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ParseError(lineno, "bad number '" + cell + "' in " + path.string());
      }
    }
    if (v.size() < 13) throw ParseError(lineno, "short row in " + path.string());
    controller::StepLog r;
    r.t = static_cast<std::size_t>(v[0]);
    r.d_true = v[1];
    r.a = v[2];
    r.y = v[3];
    r.c = v[4] != 0.0;
    r.mu = v[5];
    r.sigma = v[6];
    r.k = v[7];
    r.eta = v[8];
    r.m = v[9];
    r.b = v[10];
    r.reward = v[11];
    r.regret_cum = v[12];
    if (v.size() > 13) r.pessimism = v[13];
    rows.push_back(r);
  }
  return rows;
}

Prepared prepare(const Config& config, std::uint64_t seed) {
  Prepared p;
  p.seed = seed;
  const auto trace = make_trace(config.workload, seed);
  p.trace_stats = workload::describe(trace.demands, config.workload.period);
  p.split = workload::normalize_and_split(trace, config.workload.split);
  auto pc = config.predictor;
  pc.seed = seed;
  pc.context_width = p.split.train.context_width();
  p.model = predictor::train_predictor(p.split.train, p.split.val, pc);
  return p;
}

Prepared prepare(const Config& config, std::uint64_t seed, const predictor::PredictorModel& model) {
  Prepared p;
  p.seed = seed;
  const auto trace = make_trace(config.workload, seed);
  p.trace_stats = workload::describe(trace.demands, config.workload.period);
  p.split = workload::normalize_and_split(trace, config.workload.split);
  if (model.config().context_width != p.split.train.context_width()) {
    throw ShapeError("predictor context width does not match the trace");
  }
  p.model = model;
  return p;
}

namespace {

controller::LoopConfig picrl_loop(const Config& config) {
  controller::LoopConfig loop;
  loop.estimator = config.estimator;
  loop.controller = config.resolved_controller();
  loop.reward_from_predictor = config.agent.reward_from_predictor;
  return loop;
}

}  // namespace

agent::Agent pretrain_picrl(const Config& config, const Prepared& prepared, controller::PretrainResult* result) {
  const auto loop = picrl_loop(config);
  agent::Agent learner(config.agent, prepared.seed);
  if (!loop.controller.ablations.no_pretrain && config.agent.pretrain_epochs > 0) {
    auto pre = controller::pretrain_offline(prepared.split.train, *prepared.model, learner, loop,
                                            config.agent.pretrain_epochs);
    if (result) *result = std::move(pre);
  }
  return learner;
}

PolicyRun run_picrl_online(const Config& config, const Prepared& prepared, agent::Agent& learner,
                           PicrlArtifacts* artifacts) {
  const auto loop = picrl_loop(config);
  const auto& abl = loop.controller.ablations;
  const double kl = abl.no_kl ? 0.0 : config.agent.kl_coef;
  const double ema = abl.no_ema ? 0.0 : config.agent.ema_rate;
  const auto mode = config.agent.online_sampling ? agent::PolicyMode::sample : agent::PolicyMode::mean;
  controller::AgentPolicy policy(learner, mode, config.experiment.online_learning, kl, ema);
  controller::EpisodeStart start{&prepared.split.val, {}};

  PolicyRun run;
  run.policy = policy_label(config, "picrl");
  run.seed = prepared.seed;
  run.episode = controller::run_episode(prepared.split.test, *prepared.model, policy, loop, start);
  run.metrics = compute_metrics(run.episode.ledger, config.experiment.curve_points);
  if (artifacts) {
    artifacts->updates = policy.updates();
    artifacts->policy_checkpoint = agent::network_checkpoint("policy", learner.policy.network());
    artifacts->value_checkpoint = agent::network_checkpoint("value", learner.value.network());
  }
  return run;
}

PolicyRun run_picrl(const Config& config, const Prepared& prepared, PicrlArtifacts* artifacts) {
  controller::PretrainResult pre;
  auto learner = pretrain_picrl(config, prepared, &pre);
  auto run = run_picrl_online(config, prepared, learner, artifacts);
  if (artifacts) artifacts->pretrain = std::move(pre);
  return run;
}

PolicyRun run_policy(const Config& config, const Prepared& prepared, const std::string& policy) {
  if (policy == "picrl") return run_picrl(config, prepared);
  PolicyRun run;
  run.policy = policy;
  run.seed = prepared.seed;
  if (policy == "oracle") {
    run.episode = baselines::run_oracle(prepared.split.test, config.controller.cost);
  } else {
    auto b = make_baseline(config, policy, prepared.seed);
    run.episode = baselines::run_baseline(prepared.split.test, prepared.split.val, *prepared.model, *b,
                                          config.controller.cost);
  }
  run.metrics = compute_metrics(run.episode.ledger, config.experiment.curve_points);
  return run;
}

json summarize_runs(const Config& config, const std::vector<PolicyRun>& runs) {
  const auto ctrl = config.resolved_controller();
  const json resolved = to_json(config);
  json summary{{"format", "picrl.summary"},
               {"version", 1},
               {"config", resolved},
               {"config_hash", config_hash(resolved)},
               {"seeds", config.experiment.seeds},
               {"seed_count", config.experiment.seeds.size()},
               {"ablations", ctrl.ablations.codes()},
               {"pessimism_disabled", ctrl.ablations.no_pessimism}};
  json policies = json::object();
  std::vector<std::string> order;
  for (const auto& r : runs) {
    if (!policies.contains(r.policy)) {
      policies[r.policy] = json{{"per_seed", json::array()}};
      order.push_back(r.policy);
    }
    json entry = metrics_json(r.metrics);
    entry["seed"] = r.seed;
    policies[r.policy]["per_seed"].push_back(entry);
  }
  for (const auto& name : order) {
    auto& p = policies[name];
    const auto& seeds = p["per_seed"];
    const double n = static_cast<double>(seeds.size());
    json agg{{"mae", 0.0}, {"regret", 0.0}, {"censor_rate", 0.0}, {"over_rate", 0.0}, {"shortage_steps", 0.0}};
    for (const auto& s : seeds) {
      for (const char* key : {"mae", "regret", "censor_rate", "over_rate", "shortage_steps"}) {
        agg[key] = agg[key].get<double>() + s.at(key).get<double>() / n;
      }
    }
    agg["seed_count"] = seeds.size();
    p["aggregate"] = agg;
  }
  summary["policies"] = policies;
  summary["policy_order"] = order;
  return summary;
}

json run_pipeline(const Config& config) {
  config.validate();
  const std::filesystem::path out = config.experiment.output_dir;
  std::filesystem::create_directories(out);
  std::vector<PolicyRun> runs;
  json predictors = json::array();
  json pretraining = json::array();

  for (const auto seed : config.experiment.seeds) {
    Prepared prepared;
    try {
      prepared = prepare(config, seed);
    } catch (const Error& e) {
      throw Error(fmt::format("phase train-predictor (seed {}): {}", seed, e.what()));
    }
    const auto& h = prepared.model->history;
    predictors.push_back({{"seed", seed},
                          {"best_epoch", h.best_epoch},
                          {"best_val_nll", h.best_val_nll},
                          {"best_val_mae", h.best_val_mae}});
    if (config.experiment.write_checkpoints) prepared.model->save(out / fmt::format("predictor_seed{}.json", seed));

    for (const auto& policy : config.experiment.policies) {
      PolicyRun run;
      try {
        if (policy == "picrl") {
          PicrlArtifacts art;
          std::optional<agent::Agent> learner;
          try {
            learner.emplace(pretrain_picrl(config, prepared, &art.pretrain));
          } catch (const Error& e) {
            throw Error(fmt::format("phase pretrain-policy (seed {}): {}", seed, e.what()));
          }
          run = run_picrl_online(config, prepared, *learner, &art);
          pretraining.push_back({{"seed", seed}, {"value_loss", art.pretrain.value_loss}});
          if (config.experiment.write_checkpoints) {
            agent::write_json(out / fmt::format("policy_seed{}.json", seed), art.policy_checkpoint);
            agent::write_json(out / fmt::format("value_seed{}.json", seed), art.value_checkpoint);
          }
          write_diagnostics(run.episode.log, out / fmt::format("{}_seed{}.diag.csv", run.policy, seed));
        } else {
          run = run_policy(config, prepared, policy);
        }
      } catch (const Error& e) {
        throw Error(fmt::format("phase run-online ({} seed {}): {}", policy, seed, e.what()));
      }
      write_step_log(run.episode.log, out / fmt::format("{}_seed{}.csv", run.policy, seed));
      run.episode.log.clear();
      runs.push_back(std::move(run));
    }
  }

  json summary = summarize_runs(config, runs);
  summary["predictor"] = predictors;
  summary["pretrain"] = pretraining;
  agent::write_json(out / "summary.json", summary);
  return summary;
}

}  // namespace picrl::experiment
