#include <cmath>
#include <random>

#include "doctest.h"
#include "picrl/errors.hpp"
#include "picrl/predictor.hpp"

using namespace picrl;
using doctest::Approx;

namespace {

workload::Segment iid_segment(std::size_t n, double mean, double sd, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(mean, sd);
  workload::Segment s;
  for (std::size_t i = 0; i < n; ++i) s.demands.push_back(std::clamp(normal(rng), 0.0, 1.0));
  return s;
}

workload::Segment sinusoid(std::size_t n, std::size_t offset) {
  workload::Segment s;
  for (std::size_t i = 0; i < n; ++i) {
    s.demands.push_back(0.5 + 0.3 * std::sin(2.0 * M_PI * static_cast<double>(i + offset) / 24.0));
  }
  return s;
}

predictor::PredictorConfig small_config(std::size_t epochs) {
  predictor::PredictorConfig c;
  c.window_len = 16;
  c.hidden_width = 32;
  c.epochs = epochs;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("gaussian negative log-likelihood") {
  CHECK(predictor::nll_loss({0.3, 1.0}, 0.3) == Approx(0.0));
  CHECK(predictor::nll_loss({0.0, 1.0}, 2.0) == Approx(2.0));
  CHECK(predictor::nll_loss({0.5, 0.1}, 0.5) == Approx(std::log(0.1)));
}

TEST_CASE("config validation") {
  auto c = small_config(1);
  c.window_len = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config(1);
  c.hidden_width = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config(1);
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("analytic NLL gradient matches central differences") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    nn::Mlp net({6, 8, 8, 2}, seed);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> window(6);
    for (auto& w : window) w = u(rng);
    const auto x = predictor::make_input(window, {});
    const double target = u(rng);
    std::vector<double> grad(net.parameter_count(), 0.0);
    nn::Mlp::Tape tape;
    predictor::sample_loss_and_grad(net, x, target, grad, tape);

    auto loss_at = [&](const nn::Mlp& n) {
      const auto out = n.forward(x);
      return predictor::nll_loss({out[0], nn::softplus(out[1]) + stats::kSigmaFloor}, target);
    };
    double worst = 0.0;
    for (std::size_t i = 0; i < net.parameter_count(); ++i) {
      const double h = 1e-6;
      const double keep = net.parameters()[i];
      net.parameters()[i] = keep + h;
      const double up = loss_at(net);
      net.parameters()[i] = keep - h;
      const double down = loss_at(net);
      net.parameters()[i] = keep;
      const double fd = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-3}));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("learned sigma matches the generator noise") {
  const auto train = iid_segment(2000, 0.5, 0.05, 11);
  const auto val = iid_segment(500, 0.5, 0.05, 12);
  const auto model = predictor::train_predictor(train, val, small_config(60));
  double sigma_sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 16; i < val.size(); ++i) {
    const std::span<const double> w(val.demands.data() + i - 16, 16);
    sigma_sum += model.predict(w).stddev;
    ++n;
  }
  CHECK(std::abs(sigma_sum / static_cast<double>(n) - 0.05) <= 0.2 * 0.05);
}

TEST_CASE("constant demand collapses sigma") {
  workload::Segment train, val;
  train.demands.assign(600, 0.5);
  val.demands.assign(200, 0.5);
  const auto model = predictor::train_predictor(train, val, small_config(80));
  const std::vector<double> w(16, 0.5);
  const auto p = model.predict(w);
  CHECK(std::abs(p.mean - 0.5) <= 0.01);
  CHECK(p.mean >= 0.45);
  CHECK(p.mean <= 0.55);
  CHECK(p.stddev < 0.01);
}

TEST_CASE("noiseless sinusoid is learnable") {
  const auto model = predictor::train_predictor(sinusoid(1200, 0), sinusoid(300, 1200), small_config(150));
  CHECK(model.history.best_val_mae <= 0.02);
}

TEST_CASE("prediction is pure and shape-checked") {
  const auto model = predictor::train_predictor(sinusoid(300, 0), sinusoid(100, 300), small_config(2));
  std::vector<double> w(16, 0.3);
  w[3] = 0.9;  // an action substituted for a censored value is just another number
  const auto a = model.predict(w);
  const auto b = model.predict(w);
  CHECK(a.mean == b.mean);
  CHECK(a.stddev == b.stddev);
  CHECK(a.stddev > 0.0);
  CHECK(a.mean >= 0.0);
  CHECK(a.mean <= 1.0);
  CHECK_THROWS_AS(model.predict(std::vector<double>(15, 0.3)), ShapeError);
}

TEST_CASE("checkpoint round trip") {
  const auto model = predictor::train_predictor(sinusoid(300, 0), sinusoid(100, 300), small_config(3));
  const auto path = std::filesystem::temp_directory_path() / "picrl_unit_predictor.json";
  model.save(path);
  const auto loaded = predictor::PredictorModel::load(path);
  CHECK(loaded.network().parameters() == model.network().parameters());
  CHECK(loaded.history.best_epoch == model.history.best_epoch);
  const std::vector<double> w(16, 0.4);
  CHECK(loaded.predict(w).mean == model.predict(w).mean);
}

TEST_CASE("training is seed-deterministic") {
  const auto a = predictor::train_predictor(sinusoid(300, 0), sinusoid(100, 300), small_config(3));
  const auto b = predictor::train_predictor(sinusoid(300, 0), sinusoid(100, 300), small_config(3));
  CHECK(a.network().parameters() == b.network().parameters());
}
