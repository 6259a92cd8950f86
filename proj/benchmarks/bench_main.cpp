#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "picrl/agent.hpp"
#include "picrl/estimator.hpp"
#include "picrl/predictor.hpp"
#include "picrl/stats.hpp"
#include "picrl/workload.hpp"

using namespace picrl;

static void BM_InverseMills(benchmark::State& state) {
  double z = -8.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(stats::inverse_mills(z));
    z = z > 8.0 ? -8.0 : z + 0.001;
  }
}
BENCHMARK(BM_InverseMills);

// Tobit fit over a full window with roughly a third of entries censored.
static void BM_CensoredEstimate(benchmark::State& state) {
  estimator::EstimatorConfig config;
  config.window = static_cast<std::size_t>(state.range(0));
  estimator::CensoredWindow window(config.window);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> demand(0.5, 0.1);
  for (std::size_t i = 0; i < config.window; ++i) {
    const double d = demand(rng);
    window.push({std::min(d, 0.55), d > 0.55});
  }
  for (auto _ : state) benchmark::DoNotOptimize(estimator::estimate(window, 3, config));
}
BENCHMARK(BM_CensoredEstimate)->Arg(32)->Arg(64)->Arg(256);

static void BM_PredictorForward(benchmark::State& state) {
  predictor::PredictorConfig config;
  config.hidden_width = static_cast<std::size_t>(state.range(0));
  nn::Mlp net({config.window_len, config.hidden_width, config.hidden_width, 2}, 7);
  const predictor::PredictorModel model(config, std::move(net));
  std::vector<double> window(config.window_len, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(window));
}
BENCHMARK(BM_PredictorForward)->Arg(32)->Arg(64)->Arg(128);

// One actor-critic step on a replay batch, gradients plus Adam.
static void BM_AgentUpdate(benchmark::State& state) {
  agent::Agent agent(agent::AgentConfig{}, 3);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<agent::Experience> batch(static_cast<std::size_t>(state.range(0)));
  for (auto& e : batch) {
    for (auto& v : e.s) v = u(rng);
    for (auto& v : e.s_next) v = u(rng);
    e.raw_action = {u(rng), u(rng)};
    e.reward = u(rng);
  }
  std::vector<const agent::Experience*> ptrs;
  for (const auto& e : batch) ptrs.push_back(&e);
  for (auto _ : state) benchmark::DoNotOptimize(agent.update(ptrs, 0.1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_AgentUpdate)->Arg(32)->Arg(64);

static void BM_PredictorTrainEpoch(benchmark::State& state) {
  workload::Segment train, val;
  std::mt19937_64 rng(9);
  std::normal_distribution<double> noise(0.0, 0.05);
  for (int i = 0; i < 2000; ++i) train.demands.push_back(0.5 + 0.25 * std::sin(i / 7.6) + noise(rng));
  for (int i = 0; i < 400; ++i) val.demands.push_back(0.5 + 0.25 * std::sin((2000 + i) / 7.6) + noise(rng));
  predictor::PredictorConfig config;
  config.epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(predictor::train_predictor(train, val, config));
}
BENCHMARK(BM_PredictorTrainEpoch)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
