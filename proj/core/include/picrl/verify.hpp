#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace picrl::verify {

struct Check {
  std::string name;
  double value = 0.0;
  std::string criterion;  // human-readable threshold
  bool pass = false;
};

struct Verdict {
  std::string suite;
  std::vector<Check> checks;
  double seconds = 0.0;

  bool pass() const;
  nlohmann::json to_json() const;
  std::string table() const;
};

// Naive mixture learner on iid N(0.5, 0.1^2) demand: with rho = 1 the base level
// sinks (median final level <= 0.45, drift below -0.05); with rho = 0 it stays in
// [0.48, 0.52].
struct Prop1Options {
  std::size_t steps = 5000;
  std::size_t seeds = 20;
  double mean = 0.5;
  double stddev = 0.1;
  std::size_t history = 1000;  // uncensored historical draws behind the rho = 0 anchor
  std::uint64_t base_seed = 1;
};
Verdict prop1(const Prop1Options& options = {});

// Surrogate reward gradient consistency and escape scaling: finite-difference
// dr/da > 0 on random triples, lambda' inside (0, 1) on a dense grid, and
// |r(N_max)| == (1 + beta N_max) |r(0)| exactly.
struct Prop2Options {
  std::size_t triples = 1000;
  std::size_t escape_triples = 100;
  double grid_step = 0.01;
  double margin = 1e-9;
  std::uint64_t seed = 2;
};
Verdict prop2(const Prop2Options& options = {});

// Frozen policy on stationary demand: trailing censoring rate near the zero-drift
// rate p* and |m + b| bounded.
struct EquilibriumOptions {
  std::size_t steps = 100000;
  std::size_t trailing = 50000;
  double tolerance = 0.05;
  double bound = 1.0;
  double eta = 1.0;
  double k = 1.0;
  std::uint64_t seed = 3;
};
Verdict equilibrium(const EquilibriumOptions& options = {});

// Bounded tracking of |m + b| with policy updates off and on, and the escape from a
// forced under-provisioning state.
struct StabilityOptions {
  std::size_t steps = 100000;
  double bound = 1.0;
  std::size_t escape_steps = 200;
  std::uint64_t seed = 4;
};
Verdict stability(const StabilityOptions& options = {});

const std::vector<std::string>& suites();
Verdict run(const std::string& suite);

}  // namespace picrl::verify
