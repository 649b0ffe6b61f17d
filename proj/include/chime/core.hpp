#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace chime {

using Real = double;

inline constexpr Real kPi = 3.14159265358979323846264338327950288;
inline constexpr Real kTwoPi = 2.0 * kPi;

// Default tolerances; callers may scale them but the values themselves are
// part of the numerical contract.
inline constexpr Real kTolFrame = 1e-10;      // frame orthonormality
inline constexpr Real kTolDegenerate = 1e-12; // |det| below this is degenerate
inline constexpr Real kTolPivot = 1e-8;       // candidate rejection in frame build

// Capacity limits for the stack-allocated small tensors.  Worldvolume
// dimension is tau + up to two spatial directions; ambient dimension is the
// base spacetime plus the compact direction.
inline constexpr int kMaxWorld = 3;
inline constexpr int kMaxAmbient = 8;

struct ChimeError : std::runtime_error {
  explicit ChimeError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw ChimeError(msg);
}

// ---------------------------------------------------------------------------
// Small square matrices with runtime dimension <= kMaxWorld (worldvolume
// metrics, Christoffel contractions).  Dense row-major storage.
// ---------------------------------------------------------------------------
struct SmallMat {
  int n = 0;
  std::array<Real, kMaxWorld * kMaxWorld> a{};

  Real& operator()(int i, int j) { return a[i * n + j]; }
  Real operator()(int i, int j) const { return a[i * n + j]; }
};

inline Real det(const SmallMat& m) {
  switch (m.n) {
    case 1:
      return m(0, 0);
    case 2:
      return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    case 3:
      return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
             m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
             m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
    default:
      throw ChimeError("det: unsupported dimension " + std::to_string(m.n));
  }
}

// Inverse via adjugate; caller is responsible for checking det against the
// degeneracy tolerance first.
inline SmallMat inverse(const SmallMat& m, Real d) {
  SmallMat r;
  r.n = m.n;
  switch (m.n) {
    case 1:
      r(0, 0) = 1.0 / d;
      break;
    case 2:
      r(0, 0) = m(1, 1) / d;
      r(0, 1) = -m(0, 1) / d;
      r(1, 0) = -m(1, 0) / d;
      r(1, 1) = m(0, 0) / d;
      break;
    case 3:
      r(0, 0) = (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) / d;
      r(0, 1) = (m(0, 2) * m(2, 1) - m(0, 1) * m(2, 2)) / d;
      r(0, 2) = (m(0, 1) * m(1, 2) - m(0, 2) * m(1, 1)) / d;
      r(1, 0) = (m(1, 2) * m(2, 0) - m(1, 0) * m(2, 2)) / d;
      r(1, 1) = (m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0)) / d;
      r(1, 2) = (m(0, 2) * m(1, 0) - m(0, 0) * m(1, 2)) / d;
      r(2, 0) = (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0)) / d;
      r(2, 1) = (m(0, 1) * m(2, 0) - m(0, 0) * m(2, 1)) / d;
      r(2, 2) = (m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0)) / d;
      break;
    default:
      throw ChimeError("inverse: unsupported dimension");
  }
  return r;
}

// ---------------------------------------------------------------------------
// Deterministic RNG.  splitmix64 plus explicit bit-manipulation for uniforms
// so that streams are identical across standard libraries.
// ---------------------------------------------------------------------------
struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 significant bits.
  Real uniform() { return static_cast<Real>(next() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  Real uniform(Real lo, Real hi) { return lo + (hi - lo) * uniform(); }
};

// ---------------------------------------------------------------------------
// Fixed float formatting: 17 significant digits round-trips every double and
// keeps output byte-identical between runs.
// ---------------------------------------------------------------------------
inline std::string format_real(Real x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Least-squares slope of log(err) against log(h): the observed convergence
// order of a refinement sweep.
inline Real fit_order(const std::vector<Real>& hs, const std::vector<Real>& errs) {
  require(hs.size() == errs.size() && hs.size() >= 2, "fit_order: need >= 2 samples");
  const int m = static_cast<int>(hs.size());
  Real sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < m; ++i) {
    require(errs[i] > 0 && hs[i] > 0, "fit_order: nonpositive sample");
    const Real x = std::log(hs[i]);
    const Real y = std::log(errs[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

inline Real max_abs(const std::vector<Real>& v) {
  Real m = 0;
  for (Real x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace chime
