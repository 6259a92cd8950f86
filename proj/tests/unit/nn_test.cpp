#include <cmath>
#include <random>

#include "doctest.h"
#include "picrl/errors.hpp"
#include "picrl/nn.hpp"

using namespace picrl;
using doctest::Approx;

TEST_CASE("backpropagation matches central differences") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    nn::Mlp net({5, 7, 6, 3}, seed);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> x(5), w(3);
    for (auto& v : x) v = u(rng);
    for (auto& v : w) v = u(rng);
    // loss = w . f(x)
    auto loss = [&] {
      const auto y = net.forward(x);
      return w[0] * y[0] + w[1] * y[1] + w[2] * y[2];
    };
    nn::Mlp::Tape tape;
    net.forward(x, tape);
    std::vector<double> grad(net.parameter_count(), 0.0);
    net.backward(tape, w, grad);
    double worst = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
      const double h = 1e-6, keep = net.parameters()[i];
      net.parameters()[i] = keep + h;
      const double up = loss();
      net.parameters()[i] = keep - h;
      const double down = loss();
      net.parameters()[i] = keep;
      const double fd = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-3}));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("shapes and serialization") {
  nn::Mlp net({4, 3, 2}, 9);
  CHECK(net.parameter_count() == 4 * 3 + 3 + 3 * 2 + 2);
  CHECK_THROWS_AS(net.forward(std::vector<double>(3, 0.0)), ShapeError);
  const auto back = nn::Mlp::from_json(net.to_json());
  CHECK(back.parameters() == net.parameters());
  CHECK(back.sizes() == net.sizes());
  CHECK(nn::Mlp({4, 3, 2}, 9).parameters() == net.parameters());
}

TEST_CASE("gradient clipping") {
  std::vector<double> g{3.0, 4.0};
  CHECK(nn::clip_grad_norm(g, 1.0) == Approx(5.0));
  CHECK(g[0] == Approx(0.6));
  CHECK(g[1] == Approx(0.8));
  std::vector<double> small{0.1, 0.1};
  nn::clip_grad_norm(small, 5.0);
  CHECK(small[0] == 0.1);
}

TEST_CASE("adam minimizes a quadratic") {
  std::vector<double> p{3.0, -2.0};
  nn::Adam opt(2, 0.05);
  for (int i = 0; i < 2000; ++i) {
    const std::vector<double> g{2.0 * (p[0] - 1.0), 2.0 * (p[1] + 0.5)};
    opt.step(p, g);
  }
  CHECK(p[0] == Approx(1.0).epsilon(1e-3));
  CHECK(p[1] == Approx(-0.5).epsilon(1e-3));
}

TEST_CASE("stable activations") {
  CHECK(nn::softplus(0.0) == Approx(std::log(2.0)));
  CHECK(nn::softplus(800.0) == Approx(800.0));
  CHECK(nn::softplus(-800.0) >= 0.0);
  CHECK(nn::sigmoid(-800.0) == Approx(0.0));
  CHECK(nn::sigmoid(800.0) == Approx(1.0));
  CHECK(std::isfinite(nn::sigmoid(-800.0)));
}
