#include <cmath>
#include <cstddef>
#include <numbers>

#include "doctest.h"
#include "signflow/energy.hpp"
#include "signflow/grid.hpp"
#include "support/oracles.hpp"

using namespace signflow;

namespace {
constexpr double kPi = std::numbers::pi;

EnergyModel cubic_model(int d, int n) {
  return EnergyModel(Grid(d, n), Nonlinearity::odd_power(4.0));
}
}  // namespace

TEST_SUITE_BEGIN("energy");

TEST_CASE("functional vanishes at zero and follows the ray formula") {
  EnergyModel m = cubic_model(1, 31);
  CHECK(energy(m, Field(m.grid())) == 0.0);

  Field e1 = eigenpairs(m.grid(), 1)[0].vec;
  const double q4 = std::pow(norm_lp(e1, 4.0), 4.0);
  for (double t : {0.1, 1.0, 3.0}) {
    const double want = 0.5 * t * t - 0.25 * t * t * t * t * q4;
    CHECK(energy(m, t * e1) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("sine profile energy approaches the continuum value") {
  EnergyModel m = cubic_model(1, 255);
  Field u(m.grid());
  for (int j = 0; j < m.grid().n(); ++j) u[j] = std::sin(kPi * m.grid().coordinate(j));
  const double want = kPi * kPi / 4.0 - 0.25 * (3.0 / 8.0);
  CHECK(std::abs(energy(m, u) - want) <= 0.01 * std::abs(want));
}

TEST_CASE("functional rejects non-finite values") {
  EnergyModel m = cubic_model(1, 15);
  Field big(m.grid());
  for (std::size_t i = 0; i < big.size(); ++i) big[i] = 1e200;
  CHECK_THROWS_AS(energy(m, big), std::overflow_error);
}

TEST_CASE("solution operator fixes zero and the principal mode of a linear term") {
  EnergyModel m = cubic_model(2, 12);
  Field a0 = operator_a(m, Field(m.grid()));
  for (std::size_t i = 0; i < a0.size(); ++i) CHECK(a0[i] == 0.0);

  auto pair = eigenpairs(m.grid(), 1)[0];
  EnergyModel lin(m.grid(), oracle::linear_reaction(pair.lambda));
  Field img = operator_a(lin, pair.vec);
  CHECK(norm_h(img - pair.vec) <= 1e-8);
}

TEST_CASE("solution operator agrees with the dense route") {
  EnergyModel m = cubic_model(2, 8);
  SplitMix64 rng(31);
  Field u = sample_smooth_field(m.grid(), rng);
  Field fast = operator_a(m, u);
  Field rhs(m.grid());
  for (std::size_t i = 0; i < u.size(); ++i) rhs[i] = m.nl().f(u[i]);
  Field dense = oracle::dense_poisson(m.grid(), rhs);
  CHECK(norm_h(fast - dense) <= 1e-8 * (1.0 + norm_h(dense)));
}

TEST_CASE("ascent representative is the fixed-point defect") {
  EnergyModel m = cubic_model(1, 31);
  SplitMix64 rng(3);
  Field u = sample_smooth_field(m.grid(), rng);
  Field g = gradient_h(m, u);
  Field defect = u - operator_a(m, u);
  CHECK(norm_h(g - defect) <= 1e-12 * (1.0 + norm_h(defect)));
  Field gz = gradient_h(m, Field(m.grid()));
  CHECK(norm_h(gz) == 0.0);
}

TEST_CASE("directional derivative matches a symmetric difference quotient") {
  EnergyModel m = cubic_model(2, 12);
  for (int k = 0; k < 20; ++k) {
    SplitMix64 ru(SplitMix64::derive(100, k));
    SplitMix64 rw(SplitMix64::derive(200, k));
    Field u = sample_smooth_field(m.grid(), ru);
    Field w = sample_smooth_field(m.grid(), rw);
    const double exact = directional_derivative(m, u, w);
    const double fd = oracle::fd_directional(m, u, w, 1e-5);
    CHECK(std::abs(exact - fd) <= 1e-6 * (1.0 + std::abs(exact)));
  }
}

TEST_CASE("pairing the derivative with the defect gives the squared residual") {
  EnergyModel m = cubic_model(2, 16);
  auto at_zero = lemma_a_identity(m, Field(m.grid()));
  CHECK(at_zero.first == 0.0);
  CHECK(at_zero.second == 0.0);
  for (int k = 0; k < 10; ++k) {
    SplitMix64 rng(SplitMix64::derive(300, k));
    Field u = sample_smooth_field(m.grid(), rng);
    auto [lhs, rhs] = lemma_a_identity(m, u);
    CHECK(std::abs(lhs - rhs) <= 1e-10 * (1.0 + std::abs(rhs)));
  }
}

TEST_SUITE_END();
