#pragma once

#include <vector>

#include "chime/core.hpp"

namespace chime {

// Flat block-diagonal ambient metric: a Minkowski (or, for curvature
// validation against classic Euclidean surfaces, Euclidean) base block
// diag(-1, +1, ..., +1) together with one compact direction of constant
// positive metric coefficient g44.  The ambient Riemann tensor vanishes
// identically, so every curvature of an embedded worldvolume is extrinsic.
struct Background {
  int base_dim = 4;
  Real g44 = 1.0;
  bool lorentzian = true;  // false: Euclidean base, static analysis only

  Background() = default;
  Background(int base, Real g44_, bool lorentzian_ = true)
      : base_dim(base), g44(g44_), lorentzian(lorentzian_) {
    validate();
  }

  void validate() const {
    require(base_dim >= 2 && base_dim + 1 <= kMaxAmbient,
            "Background: base dimension out of range");
    require(g44 > 0.0, "Background: compact metric coefficient must be positive");
  }

  int total_dim() const { return base_dim + 1; }

  // Diagonal metric entry for an extended index mu in [0, total_dim).
  Real metric_diag(int mu) const {
    if (mu == base_dim) return g44;
    if (mu == 0 && lorentzian) return -1.0;
    return 1.0;
  }

  Real inner(const Real* u, const Real* v) const {
    Real s = 0;
    for (int mu = 0; mu < total_dim(); ++mu) s += metric_diag(mu) * u[mu] * v[mu];
    return s;
  }

  // Base-block inner product (extended vectors, compact component ignored).
  Real inner_base(const Real* u, const Real* v) const {
    Real s = 0;
    for (int mu = 0; mu < base_dim; ++mu) s += metric_diag(mu) * u[mu] * v[mu];
    return s;
  }
};

}  // namespace chime
