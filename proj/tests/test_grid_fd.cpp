#include <catch2/catch_amalgamated.hpp>

#include "chime/core.hpp"
#include "chime/grid.hpp"
#include "chime/spectral.hpp"

using namespace chime;

TEST_CASE("grid indexing round-trips and wraps") {
  Grid g{12, 8};
  REQUIRE(g.points() == 96);
  for (int p = 0; p < g.points(); ++p) {
    REQUIRE(g.flat(g.unflat(p)) == p);
  }
  // Direction 0 is fastest.
  std::array<int, kMaxWorld> idx{3, 5, 0};
  REQUIRE(g.flat(idx) == 3 + 12 * 5);
  REQUIRE(g.shift(0, 0, -1) == 11);
  REQUIRE(g.shift(11, 0, 1) == 0);
  REQUIRE(g.shift(0, 1, -2) == g.flat({0, 6, 0}));
  REQUIRE(g.cell_measure() == Catch::Approx(kTwoPi / 12 * kTwoPi / 8));
}

TEST_CASE("first derivative converges at fourth order") {
  std::vector<Real> hs, errs;
  for (int n : {32, 48, 64, 96}) {
    Grid g{n};
    std::vector<Real> f(n), want(n);
    for (int j = 0; j < n; ++j) {
      const Real s = g.coord(0, j);
      f[j] = std::sin(2 * s) + 0.3 * std::cos(3 * s);
      want[j] = 2 * std::cos(2 * s) - 0.9 * std::sin(3 * s);
    }
    const std::vector<Real> got = d1(g, 0, f, 1);
    Real err = 0;
    for (int j = 0; j < n; ++j) err = std::max(err, std::abs(got[j] - want[j]));
    hs.push_back(g.spacing(0));
    errs.push_back(err);
  }
  REQUIRE(fit_order(hs, errs) == Catch::Approx(4.0).margin(0.3));
}

TEST_CASE("winding slope makes seam-crossing derivatives exact") {
  Grid g{16};
  const int n = g.points();
  // Field X = sigma stored as zero residual with unit winding.
  std::vector<Real> residual(n, 0.0);
  const Real w = 1.0;
  const std::vector<Real> got = d1(g, 0, residual, 1, &w);
  for (int j = 0; j < n; ++j) REQUIRE(got[j] == 1.0);
}

TEST_CASE("derivative of a periodic field sums to zero") {
  Grid g{64};
  const int n = g.points();
  std::vector<Real> f(n);
  for (int j = 0; j < n; ++j) f[j] = std::exp(std::sin(g.coord(0, j)));
  const std::vector<Real> df = d1(g, 0, f, 1);
  Real sum = 0;
  for (Real v : df) sum += v;
  REQUIRE(std::abs(sum) < 1e-12 * n);
}

TEST_CASE("second derivative is the square of the first") {
  Grid g{48};
  const int n = g.points();
  std::vector<Real> f(n);
  for (int j = 0; j < n; ++j) f[j] = std::sin(3 * g.coord(0, j));
  const std::vector<Real> once = d1(g, 0, f, 1);
  const std::vector<Real> twice = d1(g, 0, once, 1);
  const std::vector<Real> second = d2(g, 0, f, 1);
  for (int j = 0; j < n; ++j) REQUIRE(second[j] == twice[j]);
}

TEST_CASE("two-direction derivatives act on the right axis") {
  Grid g{16, 12};
  const int n = g.points();
  std::vector<Real> f(n);
  for (int p = 0; p < n; ++p) {
    const auto idx = g.unflat(p);
    f[p] = std::sin(g.coord(0, idx[0])) * std::cos(g.coord(1, idx[1]));
  }
  const std::vector<Real> d0 = d1(g, 0, f, 1);
  const std::vector<Real> dA = d1(g, 1, f, 1);
  for (int p = 0; p < n; ++p) {
    const auto idx = g.unflat(p);
    const Real s = g.coord(0, idx[0]), t = g.coord(1, idx[1]);
    REQUIRE(d0[p] == Catch::Approx(std::cos(s) * std::cos(t)).margin(5e-3));
    REQUIRE(dA[p] == Catch::Approx(-std::sin(s) * std::sin(t)).margin(5e-3));
  }
}

TEST_CASE("small matrix inverse") {
  SmallMat m;
  m.n = 3;
  SplitMix64 rng(7);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = (i == j ? 2.0 : 0.0) + 0.3 * rng.uniform(-1, 1);
  const Real dm = det(m);
  REQUIRE(std::abs(dm) > 1.0);
  const SmallMat inv = inverse(m, dm);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      Real s = 0;
      for (int k = 0; k < 3; ++k) s += m(i, k) * inv(k, j);
      REQUIRE(s == Catch::Approx(i == j ? 1.0 : 0.0).margin(1e-13));
    }
}

TEST_CASE("rng streams are deterministic and uniform-ranged") {
  SplitMix64 a(42), b(42), c(43);
  bool differ = false;
  Real mean = 0;
  for (int i = 0; i < 1000; ++i) {
    const Real va = a.uniform();
    REQUIRE(va == b.uniform());
    if (va != c.uniform()) differ = true;
    REQUIRE(va >= 0.0);
    REQUIRE(va < 1.0);
    mean += va;
  }
  REQUIRE(differ);
  REQUIRE(mean / 1000 == Catch::Approx(0.5).margin(0.05));
}

TEST_CASE("seventeen-digit formatting round-trips") {
  for (Real x : {0.1, 1.0 / 3.0, 1e300, -2.5e-17, kPi}) {
    const std::string s = format_real(x);
    REQUIRE(std::stod(s) == x);
  }
}

TEST_CASE("order fit recovers a power law") {
  std::vector<Real> hs{0.1, 0.05, 0.025, 0.0125}, errs;
  for (Real h : hs) errs.push_back(3.7 * std::pow(h, 2.5));
  REQUIRE(fit_order(hs, errs) == Catch::Approx(2.5).margin(1e-12));
}

TEST_CASE("fourier fit interpolates and differentiates smooth data") {
  const int m = 64;
  std::vector<Real> samples(m);
  for (int j = 0; j < m; ++j) {
    const Real u = kTwoPi * j / m;
    samples[j] = std::exp(0.4 * std::cos(u));
  }
  const FourierSeries f = fourier_fit(samples);
  for (int j = 0; j < m; ++j) {
    const Real u = kTwoPi * j / m;
    REQUIRE(f.eval(u) == Catch::Approx(samples[j]).margin(1e-12));
    const Real want = -0.4 * std::sin(u) * std::exp(0.4 * std::cos(u));
    REQUIRE(f.eval_derivative(u) == Catch::Approx(want).margin(1e-10));
  }
}

TEST_CASE("fourier antiderivative inverts the derivative") {
  const int m = 32;
  std::vector<Real> samples(m);
  for (int j = 0; j < m; ++j) {
    const Real u = kTwoPi * j / m;
    samples[j] = std::cos(u) + 0.5 * std::sin(2 * u);
  }
  const FourierSeries f = fourier_fit(samples);
  const FourierSeries g = f.antiderivative();
  for (int j = 0; j < 257; ++j) {
    const Real u = kTwoPi * j / 257;
    REQUIRE(g.eval_derivative(u) == Catch::Approx(f.eval(u)).margin(1e-12));
    const Real want = std::sin(u) - 0.25 * std::cos(2 * u);  // zero-mean primitive
    REQUIRE(g.eval(u) == Catch::Approx(want).margin(1e-12));
  }
}
