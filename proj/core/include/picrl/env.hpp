#pragma once

#include <cstddef>
#include <vector>

namespace picrl::env {

// Asymmetric linear newsvendor cost.
struct CostModel {
  double c_under = 2.0;
  double c_over = 1.0;

  void validate() const;
  // c_under * (d - a)_+ + c_over * (a - d)_+
  double loss(double a, double d) const;
};

// The only per-step signal a learner receives.
struct Feedback {
  double y = 0.0;          // min(d, a)
  bool censored = false;   // d > a
};

struct StepOutcome {
  Feedback feedback;
  double cost = 0.0;
};

// One censored interaction. Throws ValidationError when d_true or a leave [0, 1].
StepOutcome step(double d_true, double a, const CostModel& cost);

struct StepRecord {
  std::size_t t = 0;
  double d_true = 0.0;
  double a = 0.0;
  double y = 0.0;
  bool censored = false;
  double cost = 0.0;
};

// Evaluation record of an episode. Holds true demand, so it is never handed to learners.
class EpisodeLedger {
 public:
  void append(const StepRecord& record);

  const std::vector<StepRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  double cumulative_regret() const { return regret_; }
  std::size_t censored_count() const { return censored_; }
  std::size_t uncensored_count() const { return records_.size() - censored_; }
  std::size_t over_count() const { return over_; }

 private:
  std::vector<StepRecord> records_;
  double regret_ = 0.0;
  std::size_t censored_ = 0;
  std::size_t over_ = 0;
};

double mae(const EpisodeLedger& ledger);
double regret(const EpisodeLedger& ledger);
double censoring_rate(const EpisodeLedger& ledger);
double over_provision_rate(const EpisodeLedger& ledger);

// Counterfactual censoring environment over a fixed demand sequence. Learners see
// only the Feedback returned by step(); the true demand stays inside.
class Environment {
 public:
  enum class Access { learner, evaluation };

  Environment(std::vector<double> demands, CostModel cost, Access access = Access::learner);

  Feedback step(double a);

  bool done() const { return t_ >= demands_.size(); }
  std::size_t t() const { return t_; }
  std::size_t horizon() const { return demands_.size(); }
  const CostModel& cost() const { return cost_; }
  const EpisodeLedger& ledger() const { return ledger_; }

  // Demand of the upcoming step. Only an evaluation-mode environment answers;
  // otherwise throws AccessError.
  double oracle_demand() const;

 private:
  std::vector<double> demands_;
  CostModel cost_;
  Access access_;
  std::size_t t_ = 0;
  EpisodeLedger ledger_;
};

}  // namespace picrl::env
