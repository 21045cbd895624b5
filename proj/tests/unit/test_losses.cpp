#include "mvt/losses.hpp"

#include "doctest.h"

#include <cmath>
#include <random>

using namespace mvt;

namespace {

double finite_difference(const LossSpec& spec, double a, double b,
                         double h = 1e-6) {
  return (loss_value(spec, a + h, b) - loss_value(spec, a - h, b)) / (2.0 * h);
}

}  // namespace

TEST_CASE("squared error values and derivatives") {
  const LossSpec spec = LossSpec::squared_error();
  CHECK(spec.beta == 1.0);
  CHECK(spec.sigma == 1.0);
  CHECK(loss_value(spec, 3.0, 1.0) == doctest::Approx(2.0));
  CHECK(loss_value(spec, 1.5, 1.5) == 0.0);
  CHECK(loss_derivative(spec, 3.0, 1.0) == doctest::Approx(2.0));
}

TEST_CASE("logistic values and derivatives") {
  const LossSpec spec = LossSpec::logistic(5.0);
  CHECK(spec.beta == 0.25);
  const double expected_sigma = std::exp(-5.0) / std::pow(1.0 + std::exp(-5.0), 2);
  CHECK(spec.sigma == doctest::Approx(expected_sigma).epsilon(1e-12));

  CHECK(loss_value(spec, 0.0, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(loss_derivative(spec, 0.0, 1.0) == doctest::Approx(-0.5).epsilon(1e-12));
  // Saturated regime, checked against the finite-difference oracle.
  const double fd = finite_difference(spec, 10.0, 1.0);
  CHECK(loss_derivative(spec, 10.0, 1.0) ==
        doctest::Approx(fd).epsilon(1e-5));
  CHECK(loss_derivative(spec, 10.0, 1.0) < 0.0);

  CHECK_THROWS_AS(loss_value(spec, 0.0, 0.5), InvalidInput);
  CHECK_THROWS_AS(loss_derivative(spec, 0.0, 2.0), InvalidInput);
}

TEST_CASE("logistic is stable far into the tails") {
  const LossSpec spec = LossSpec::logistic(50.0);
  CHECK(std::isfinite(loss_value(spec, -800.0, 1.0)));
  CHECK(loss_value(spec, -800.0, 1.0) == doctest::Approx(800.0));
  CHECK(loss_value(spec, 800.0, 1.0) == doctest::Approx(0.0));
  CHECK(std::isfinite(loss_derivative(spec, -800.0, 1.0)));
}

TEST_CASE("self-boundedness gap") {
  const LossSpec sq = LossSpec::squared_error();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 3.0);
  for (int i = 0; i < 100; ++i) {
    const double a = normal(rng), b = normal(rng);
    CHECK(self_boundedness_gap(sq, a, b) == doctest::Approx(0.0).epsilon(1e-12));
  }

  const LossSpec lg = LossSpec::logistic(10.0);
  const double expected = 0.5 * std::log(2.0) - 0.25;
  CHECK(self_boundedness_gap(lg, 0.0, 1.0) ==
        doctest::Approx(expected).epsilon(1e-12));
  // Asymptotic regime: loss ~ 50, derivative ~ -1.
  CHECK(self_boundedness_gap(lg, -50.0, 1.0) ==
        doctest::Approx(24.0).epsilon(1e-9));
}

TEST_CASE("self-boundedness holds on random points") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(0.0, 10.0);
  std::bernoulli_distribution coin(0.5);
  const LossSpec sq = LossSpec::squared_error();
  const LossSpec lg = LossSpec::logistic(30.0);
  for (int i = 0; i < 10000; ++i) {
    const double a = normal(rng);
    CHECK(self_boundedness_gap(sq, a, normal(rng)) >= -1e-12);
    CHECK(self_boundedness_gap(lg, a, coin(rng) ? 1.0 : -1.0) >= -1e-12);
  }
}

TEST_CASE("smoothness and strong convexity inequalities") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> wide(0.0, 10.0);
  std::bernoulli_distribution coin(0.5);
  const double bound = 4.0;
  const LossSpec sq = LossSpec::squared_error();
  const LossSpec lg = LossSpec::logistic(bound);
  std::uniform_real_distribution<double> in_bound(-bound, bound);

  for (int i = 0; i < 10000; ++i) {
    {
      const double a1 = wide(rng), a2 = wide(rng), b = wide(rng);
      const double gap = loss_value(sq, a1, b) - loss_value(sq, a2, b) -
                         loss_derivative(sq, a2, b) * (a1 - a2);
      CHECK(gap <= 0.5 * sq.beta * (a1 - a2) * (a1 - a2) + 1e-12);
      CHECK(gap >= 0.5 * sq.sigma * (a1 - a2) * (a1 - a2) - 1e-12);
    }
    {
      const double a1 = wide(rng), a2 = wide(rng);
      const double b = coin(rng) ? 1.0 : -1.0;
      const double gap = loss_value(lg, a1, b) - loss_value(lg, a2, b) -
                         loss_derivative(lg, a2, b) * (a1 - a2);
      CHECK(gap <= 0.5 * lg.beta * (a1 - a2) * (a1 - a2) + 1e-12);
      // Strong convexity only on the bounded decision interval.
      const double c1 = in_bound(rng), c2 = in_bound(rng);
      const double gap_in = loss_value(lg, c1, b) - loss_value(lg, c2, b) -
                            loss_derivative(lg, c2, b) * (c1 - c2);
      CHECK(gap_in >= 0.5 * lg.sigma * (c1 - c2) * (c1 - c2) - 1e-12);
    }
  }
}

TEST_CASE("derivative matches finite differences") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> normal(0.0, 3.0);
  std::bernoulli_distribution coin(0.5);
  const LossSpec sq = LossSpec::squared_error();
  const LossSpec lg = LossSpec::logistic(20.0);
  for (int i = 0; i < 500; ++i) {
    const double a = normal(rng);
    {
      const double b = normal(rng);
      const double fd = finite_difference(sq, a, b);
      CHECK(loss_derivative(sq, a, b) ==
            doctest::Approx(fd).epsilon(1e-6).scale(std::abs(fd) + 1.0));
    }
    {
      const double b = coin(rng) ? 1.0 : -1.0;
      const double fd = finite_difference(lg, a, b);
      CHECK(loss_derivative(lg, a, b) ==
            doctest::Approx(fd).epsilon(1e-6).scale(std::abs(fd) + 1.0));
    }
  }
}

TEST_CASE("loss names round-trip") {
  CHECK(loss_kind_from_name("squared") == LossKind::SquaredError);
  CHECK(loss_kind_from_name("logistic") == LossKind::Logistic);
  CHECK_THROWS_AS(loss_kind_from_name("hinge"), ConfigError);
}
