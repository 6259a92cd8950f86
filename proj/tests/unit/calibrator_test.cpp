#include <cmath>

#include "doctest.h"
#include "picrl/calibrator.hpp"
#include "picrl/errors.hpp"

using namespace picrl;
using doctest::Approx;

TEST_CASE("action composition") {
  controller::CalibratorState c;
  c.m = 0.01;
  c.b = 0.01;
  CHECK(controller::compose_action(0.6, 0.05, 1.0, c) == Approx(0.67));
  c.m = 0.03;
  c.b = 0.02;
  CHECK(controller::compose_action(0.95, 0.1, 2.0, c) == 1.0);
  CHECK(controller::compose_action(0.42, 0.1, 0.0, controller::CalibratorState{}) == 0.42);
  c.m = -0.5;
  CHECK(controller::compose_action(0.1, 0.0, 0.0, c) == 0.0);
}

TEST_CASE("event-driven updates") {
  controller::ControllerConfig cfg;
  controller::CalibratorState s;
  s.m = 0.01;
  auto up = controller::fast_update(s, {0.5, true}, 0.5, 1.0, cfg);
  CHECK(up.m == Approx(0.015));
  CHECK(up.n_censored_streak == 1);

  cfg.delta_b = 0.004;
  s = {};
  s.b = 0.02;
  auto down = controller::fast_update(s, {0.3, false}, 0.5, 2.0, cfg);
  CHECK(down.b == Approx(0.016));
  CHECK(down.n_over_streak == 1);
  CHECK(down.n_censored_streak == 0);

  const auto hit = controller::fast_update(s, {0.5, false}, 0.5, 2.0, cfg);
  CHECK(hit.m == s.m);
  CHECK(hit.b == s.b);

  CHECK_THROWS_AS(controller::fast_update(s, {0.5, true}, 0.5, 0.4, cfg), ValidationError);
  CHECK_THROWS_AS(controller::fast_update(s, {0.5, true}, 0.5, 3.1, cfg), ValidationError);
}

TEST_CASE("alternating events telescope") {
  controller::ControllerConfig cfg;
  cfg.delta_m = 0.003;
  cfg.delta_b = 0.003;
  controller::CalibratorState s;
  for (int pair = 1; pair <= 10; ++pair) {
    s = controller::fast_update(s, {0.5, true}, 0.5, 1.0, cfg);
    s = controller::fast_update(s, {0.2, false}, 0.5, 1.0, cfg);
    CHECK(std::abs(s.m) < 1e-15);
    CHECK(s.b == Approx(pair * 0.003 * 0.5));
  }
}

TEST_CASE("equilibrium censoring rate") {
  controller::ControllerConfig cfg;
  cfg.delta_m = 0.004;
  cfg.delta_b = 0.004;
  CHECK(controller::equilibrium_censoring_rate(cfg) == Approx(0.42857142857142855));
  CHECK(controller::equilibrium_censoring_rate(controller::ControllerConfig{}) == Approx(0.46153846153846156));
}

TEST_CASE("ablation codes") {
  controller::AblationFlags f;
  CHECK_FALSE(f.any());
  f.enable("A3");
  f.enable("A7");
  CHECK(f.no_pessimism);
  CHECK(f.no_pretrain);
  CHECK(f.codes() == std::vector<std::string>{"A3", "A7"});
  CHECK_THROWS_AS(f.enable("A8"), ConfigError);
}

TEST_CASE("diminishing step sizes") {
  controller::ControllerConfig cfg;
  CHECK(cfg.step_scale(5000) == 1.0);
  cfg.diminishing_steps = true;
  CHECK(cfg.step_scale(0) == 1.0);
  CHECK(cfg.step_scale(1000) == Approx(std::pow(2.0, -0.6)));
  CHECK(cfg.step_scale(2000) < cfg.step_scale(1000));
}

TEST_CASE("config validation") {
  controller::ControllerConfig cfg;
  cfg.gamma = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.delta_m = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
