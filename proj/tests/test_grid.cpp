#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "signflow/grid.hpp"
#include "support/oracles.hpp"

using namespace signflow;

namespace {
constexpr double kPi = std::numbers::pi;

Field random_field(const Grid& g, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Field u(g);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = rng.uniform(-1.0, 1.0);
  return u;
}
}  // namespace

TEST_SUITE_BEGIN("grid");

TEST_CASE("geometry is derived from the two stored integers") {
  Grid g1(1, 3);
  CHECK(g1.h() == 0.25);
  CHECK(g1.cell_measure() == 0.25);
  CHECK(g1.node_count() == 3);
  CHECK(g1.coordinate(0) == 0.25);
  CHECK(g1.coordinate(2) == 0.75);

  Grid g2(2, 4);
  CHECK(g2.node_count() == 16);
  CHECK(g2.cell_measure() == doctest::Approx(1.0 / 25.0).epsilon(1e-15));

  CHECK_THROWS_AS(Grid(3, 5), std::invalid_argument);
  CHECK_THROWS_AS(Grid(1, 2), std::invalid_argument);
}

TEST_CASE("field construction and arithmetic") {
  Grid g(1, 5);
  Field a(g);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == 0.0);
  CHECK_THROWS_AS(Field(g, std::vector<double>{1.0, 2.0}), std::invalid_argument);

  Field u = random_field(g, 11);
  Field v = random_field(g, 12);
  Field w = u;
  w += v;
  for (std::size_t i = 0; i < u.size(); ++i) CHECK(w[i] == u[i] + v[i]);
  w = u;
  axpy(2.5, v, w);
  for (std::size_t i = 0; i < u.size(); ++i) CHECK(w[i] == u[i] + 2.5 * v[i]);
  Field s = 3.0 * u;
  for (std::size_t i = 0; i < u.size(); ++i) CHECK(s[i] == 3.0 * u[i]);

  Grid other(1, 7);
  Field z(other);
  CHECK_THROWS_AS(require_same_grid(u, z, "test"), GridMismatchError);
}

TEST_CASE("three-point stencil reproduces its closed-form eigenpair at n = 3") {
  Grid g(1, 3);
  Field u(g);
  for (int j = 0; j < 3; ++j) u[j] = std::sin((j + 1) * kPi / 4.0);
  const double lambda = 16.0 * (2.0 - std::sqrt(2.0));
  Field lu = laplacian_apply(g, u);
  for (std::size_t i = 0; i < u.size(); ++i)
    CHECK(lu[i] == doctest::Approx(lambda * u[i]).epsilon(1e-12));
}

TEST_CASE("stencil application matches a dense assembly") {
  Grid g(2, 8);
  Field u = random_field(g, 42);
  Field fast = laplacian_apply(g, u);
  std::vector<double> a = oracle::dense_stencil_matrix(g);
  const std::size_t m = g.node_count();
  for (std::size_t r = 0; r < m; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < m; ++c) acc += a[r * m + c] * u[c];
    CHECK(std::abs(fast[r] - acc) <= 1e-12 * (1.0 + std::abs(acc)));
  }
  Field zero(g);
  Field lz = laplacian_apply(g, zero);
  for (std::size_t i = 0; i < lz.size(); ++i) CHECK(lz[i] == 0.0);
}

TEST_CASE("stencil matrix is symmetric in the mass pairing") {
  Grid g(2, 6);
  Field u = random_field(g, 5);
  Field v = random_field(g, 6);
  const double lhs = inner_l2(laplacian_apply(g, u), v);
  const double rhs = inner_l2(u, laplacian_apply(g, v));
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("direct solve agrees with the dense route and certifies residuals") {
  Grid g(2, 16);
  Field rhs = random_field(g, 99);
  Field x = solve_poisson(g, rhs, 1e-10);
  Field xd = oracle::dense_poisson(g, rhs);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (x[i] - xd[i]) * (x[i] - xd[i]);
    den += xd[i] * xd[i];
  }
  CHECK(std::sqrt(num) <= 1e-8 * std::sqrt(den));

  Field res = laplacian_apply(g, x) - rhs;
  CHECK(norm_l2(res) <= 1e-10 * norm_l2(rhs));

  Field zero(g);
  Field xz = solve_poisson(g, zero, 1e-10);
  for (std::size_t i = 0; i < xz.size(); ++i) CHECK(xz[i] == 0.0);

  CHECK_THROWS_AS(solve_poisson(g, rhs, -1.0), std::invalid_argument);
}

TEST_CASE("solve then apply is the identity") {
  Grid g(1, 63);
  Field rhs = random_field(g, 17);
  Field x = solve_poisson(g, rhs, 1e-12);
  Field back = laplacian_apply(g, x);
  for (std::size_t i = 0; i < rhs.size(); ++i)
    CHECK(back[i] == doctest::Approx(rhs[i]).epsilon(1e-8));
}

TEST_CASE("inner products and norms are consistent") {
  Grid g(2, 10);
  Field u = random_field(g, 1);
  Field v = random_field(g, 2);
  CHECK(inner_h(u, v) == doctest::Approx(inner_h(v, u)).epsilon(1e-12));
  CHECK(inner_h(u, u) == doctest::Approx(norm_h(u) * norm_h(u)).epsilon(1e-12));
  CHECK(inner_h(u, v) == doctest::Approx(inner_l2(laplacian_apply(g, u), v)).epsilon(1e-11));
  CHECK(norm_l2(u) == doctest::Approx(std::sqrt(inner_l2(u, u))).epsilon(1e-14));
  CHECK_THROWS_AS(norm_lp(u, 0.5), std::invalid_argument);

  Grid gc(1, 3);
  Field c(gc, {2.0, 2.0, 2.0});
  // |u|_4 on a constant field: (h * 3 * 2^4)^(1/4).
  CHECK(norm_lp(c, 4.0) == doctest::Approx(std::pow(0.25 * 3 * 16.0, 0.25)).epsilon(1e-14));
}

TEST_CASE("sine profile has the expected energy norm on a fine interval") {
  Grid g(1, 255);
  Field u(g);
  for (int j = 0; j < g.n(); ++j) u[j] = std::sin(kPi * g.coordinate(j));
  const double want = kPi * kPi / 2.0;
  const double got = norm_h(u) * norm_h(u);
  CHECK(std::abs(got - want) <= 0.01 * want);
}

TEST_CASE("interval spectrum at n = 3 is the closed-form triple") {
  Grid g(1, 3);
  auto pairs = eigenpairs(g, 3);
  REQUIRE(pairs.size() == 3);
  CHECK(pairs[0].lambda == doctest::Approx(16.0 * (2.0 - std::sqrt(2.0))).epsilon(1e-8));
  CHECK(pairs[1].lambda == doctest::Approx(32.0).epsilon(1e-8));
  CHECK(pairs[2].lambda == doctest::Approx(16.0 * (2.0 + std::sqrt(2.0))).epsilon(1e-8));
  for (const auto& ep : pairs) {
    CHECK(norm_h(ep.vec) == doctest::Approx(1.0).epsilon(1e-10));
    Field res = laplacian_apply(g, ep.vec) - ep.lambda * ep.vec;
    CHECK(norm_l2(res) <= 1e-8 * ep.lambda);
  }
  CHECK_THROWS_AS(eigenpairs(g, 5), std::invalid_argument);
}

TEST_CASE("square spectrum approaches the continuum and the ground mode is positive") {
  Grid g(2, 16);
  auto pairs = eigenpairs(g, 2);
  REQUIRE(pairs.size() == 2);
  // Closed-form discrete values for the 5-point stencil.
  const double h = g.h();
  auto axis = [&](int k) { return 2.0 * (1.0 - std::cos(k * kPi * h)) / (h * h); };
  CHECK(pairs[0].lambda == doctest::Approx(axis(1) + axis(1)).epsilon(1e-8));
  CHECK(pairs[1].lambda == doctest::Approx(axis(2) + axis(1)).epsilon(1e-8));
  CHECK(std::abs(pairs[0].lambda - 2.0 * kPi * kPi) <= 0.01 * 2.0 * kPi * kPi);
  for (std::size_t i = 0; i < pairs[0].vec.size(); ++i) CHECK(pairs[0].vec[i] > 0.0);

  // Deterministic orientation of the degenerate second mode: positive mass
  // against sin(2 pi x) sin(pi y) and a positive value near (1/4, 1/2).
  Field tmpl(g);
  for (int r = 0; r < g.n(); ++r)
    for (int c = 0; c < g.n(); ++c)
      tmpl[static_cast<std::size_t>(r) * g.n() + c] =
          std::sin(2.0 * kPi * g.coordinate(c)) * std::sin(kPi * g.coordinate(r));
  CHECK(inner_l2(pairs[1].vec, tmpl) > 0.0);
}

TEST_CASE("smooth sampler is deterministic in the seed") {
  Grid g(2, 12);
  SplitMix64 a(7), b(7), c(8);
  Field ua = sample_smooth_field(g, a);
  Field ub = sample_smooth_field(g, b);
  Field uc = sample_smooth_field(g, c);
  bool same = true, differs = false;
  for (std::size_t i = 0; i < ua.size(); ++i) {
    same = same && ua[i] == ub[i];
    differs = differs || ua[i] != uc[i];
  }
  CHECK(same);
  CHECK(differs);
}

TEST_SUITE_END();
