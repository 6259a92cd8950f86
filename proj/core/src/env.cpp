#include "picrl/env.hpp"

#include <cmath>
#include <fmt/format.h>

#include "picrl/errors.hpp"

namespace picrl::env {

namespace {

bool in_unit_interval(double x) { return x >= 0.0 && x <= 1.0; }

}  // namespace

void CostModel::validate() const {
  if (!(c_over > 0.0) || !(c_under > c_over)) {
    throw ConfigError(fmt::format("cost model requires c_under > c_over > 0 (got {}, {})", c_under, c_over));
  }
}

double CostModel::loss(double a, double d) const {
  return d > a ? c_under * (d - a) : c_over * (a - d);
}

StepOutcome step(double d_true, double a, const CostModel& cost) {
  if (!in_unit_interval(d_true)) throw ValidationError(fmt::format("demand {} outside [0,1]", d_true));
  if (!in_unit_interval(a)) throw ValidationError(fmt::format("action {} outside [0,1]", a));
  StepOutcome out;
  out.feedback.censored = d_true > a;
  out.feedback.y = out.feedback.censored ? a : d_true;
  out.cost = cost.loss(a, d_true);
  return out;
}

void EpisodeLedger::append(const StepRecord& record) {
  records_.push_back(record);
  regret_ += record.cost;
  if (record.censored) ++censored_;
  if (record.a > record.d_true) ++over_;
}

double mae(const EpisodeLedger& ledger) {
  if (ledger.empty()) throw EmptyLedgerError("mae of an empty ledger");
  double sum = 0.0;
  for (const auto& r : ledger.records()) sum += std::abs(r.a - r.d_true);
  return sum / static_cast<double>(ledger.size());
}

double regret(const EpisodeLedger& ledger) { return ledger.cumulative_regret(); }

double censoring_rate(const EpisodeLedger& ledger) {
  if (ledger.empty()) throw EmptyLedgerError("censoring rate of an empty ledger");
  return static_cast<double>(ledger.censored_count()) / static_cast<double>(ledger.size());
}

double over_provision_rate(const EpisodeLedger& ledger) {
  if (ledger.empty()) throw EmptyLedgerError("over-provision rate of an empty ledger");
  return static_cast<double>(ledger.over_count()) / static_cast<double>(ledger.size());
}

Environment::Environment(std::vector<double> demands, CostModel cost, Access access)
    : demands_(std::move(demands)), cost_(cost), access_(access) {
  cost_.validate();
  for (double d : demands_) {
    if (!in_unit_interval(d)) throw ValidationError(fmt::format("environment demand {} outside [0,1]", d));
  }
}

Feedback Environment::step(double a) {
  if (done()) throw ValidationError("environment stepped past its horizon");
  const double d = demands_[t_];
  const StepOutcome out = env::step(d, a, cost_);
  ledger_.append(StepRecord{t_, d, a, out.feedback.y, out.feedback.censored, out.cost});
  ++t_;
  return out.feedback;
}

double Environment::oracle_demand() const {
  if (access_ != Access::evaluation) {
    throw AccessError("true demand requested outside the evaluation harness");
  }
  if (done()) throw ValidationError("no upcoming demand");
  return demands_[t_];
}

}  // namespace picrl::env
