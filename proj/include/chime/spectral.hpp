#pragma once

#include <vector>

#include "chime/core.hpp"

namespace chime {

// Real trigonometric series on [0, 2*pi):
//   f(u) = a0 + sum_k ( ak[k] cos(k u) + bk[k] sin(k u) ),  k = 1 .. K.
// Built from equispaced samples by a plain DFT (deterministic, O(m^2), used
// only at setup on small sample counts).  For analytic periodic data the
// coefficients decay exponentially, so evaluation reproduces the function and
// its derivatives to machine accuracy once m is modestly larger than the
// bandwidth.
struct FourierSeries {
  Real a0 = 0;
  std::vector<Real> ak;  // cos coefficients, index k-1
  std::vector<Real> bk;  // sin coefficients, index k-1

  int harmonics() const { return static_cast<int>(ak.size()); }

  Real eval(Real u) const {
    Real s = a0;
    for (int k = 1; k <= harmonics(); ++k)
      s += ak[k - 1] * std::cos(k * u) + bk[k - 1] * std::sin(k * u);
    return s;
  }

  Real eval_derivative(Real u) const {
    Real s = 0;
    for (int k = 1; k <= harmonics(); ++k)
      s += k * (-ak[k - 1] * std::sin(k * u) + bk[k - 1] * std::cos(k * u));
    return s;
  }

  // Antiderivative with zero mean; requires a0 == 0 (periodic primitive).
  // Integrating cos(ku) -> sin(ku)/k and sin(ku) -> -cos(ku)/k.
  FourierSeries antiderivative() const {
    require(std::abs(a0) < 1e-13, "FourierSeries: antiderivative needs zero mean");
    FourierSeries g;
    g.ak.resize(ak.size());
    g.bk.resize(bk.size());
    for (int k = 1; k <= harmonics(); ++k) {
      g.ak[k - 1] = -bk[k - 1] / k;
      g.bk[k - 1] = ak[k - 1] / k;
    }
    return g;
  }
};

// Fit a series through m equispaced samples f(2*pi*j/m), keeping harmonics up
// to m/2 - 1 (the unmatched Nyquist cosine is folded in as well for even m so
// that the series interpolates the samples of smooth inputs to roundoff).
inline FourierSeries fourier_fit(const std::vector<Real>& samples) {
  const int m = static_cast<int>(samples.size());
  require(m >= 4, "fourier_fit: need at least 4 samples");
  const int kmax = (m - 1) / 2;
  FourierSeries f;
  f.ak.assign(kmax, 0.0);
  f.bk.assign(kmax, 0.0);
  Real mean = 0;
  for (Real s : samples) mean += s;
  f.a0 = mean / m;
  for (int k = 1; k <= kmax; ++k) {
    Real ca = 0, cb = 0;
    for (int j = 0; j < m; ++j) {
      const Real u = kTwoPi * j / m;
      ca += samples[j] * std::cos(k * u);
      cb += samples[j] * std::sin(k * u);
    }
    f.ak[k - 1] = 2.0 * ca / m;
    f.bk[k - 1] = 2.0 * cb / m;
  }
  return f;
}

}  // namespace chime
