#pragma once

#include <array>
#include <vector>

#include "chime/core.hpp"

namespace chime {

// Uniform periodic grid over the spatial worldvolume directions.  Every
// direction covers one period of length 2*pi with n_i points at
// xi_j = j * h_i (plus an optional phase used by scenarios, not stored here).
struct Grid {
  int dim = 1;
  std::array<int, kMaxWorld> n{};

  Grid() = default;
  Grid(std::initializer_list<int> sizes) {
    dim = static_cast<int>(sizes.size());
    require(dim >= 1 && dim <= kMaxWorld - 1, "Grid: spatial dimension out of range");
    int i = 0;
    for (int s : sizes) n[i++] = s;
    validate();
  }

  void validate() const {
    for (int i = 0; i < dim; ++i)
      require(n[i] >= 8, "Grid: each direction needs at least 8 points");
  }

  int points() const {
    int p = 1;
    for (int i = 0; i < dim; ++i) p *= n[i];
    return p;
  }

  Real spacing(int dir) const { return kTwoPi / n[dir]; }

  Real min_spacing() const {
    Real h = spacing(0);
    for (int i = 1; i < dim; ++i) h = std::min(h, spacing(i));
    return h;
  }

  // Flattened index with direction 0 fastest (column-major over xi^1).
  int flat(const std::array<int, kMaxWorld>& idx) const {
    int f = 0;
    for (int i = dim - 1; i >= 0; --i) f = f * n[i] + idx[i];
    return f;
  }

  std::array<int, kMaxWorld> unflat(int f) const {
    std::array<int, kMaxWorld> idx{};
    for (int i = 0; i < dim; ++i) {
      idx[i] = f % n[i];
      f /= n[i];
    }
    return idx;
  }

  Real coord(int dir, int idx) const { return spacing(dir) * idx; }

  // Flat index of the neighbour `off` steps along `dir`, wrapping periodically.
  int shift(int f, int dir, int off) const {
    std::array<int, kMaxWorld> idx = unflat(f);
    int j = (idx[dir] + off) % n[dir];
    if (j < 0) j += n[dir];
    idx[dir] = j;
    return flat(idx);
  }

  // Cell measure d^d sigma for slice sums.
  Real cell_measure() const {
    Real m = 1;
    for (int i = 0; i < dim; ++i) m *= spacing(i);
    return m;
  }
};

// ---------------------------------------------------------------------------
// Finite differences.  First derivatives use the 4th-order centred stencil
// (-f2 + 8 f1 - 8 f-1 + f-2) / (12 h).  Second derivatives along a grid
// direction are the same stencil applied twice, which keeps the discrete
// Leibniz defect at O(h^4) and makes the wave operator an exact square of the
// first-difference operator.
//
// `winding` is the linear growth of the field per unit coordinate along the
// direction: fields such as X^1 = sigma are stored as periodic residuals plus
// a winding slope so that differencing across the seam stays exact.
// ---------------------------------------------------------------------------

// field: npts * ncomp, point-major.  Differentiates every component.
inline void d1(const Grid& g, int dir, const std::vector<Real>& field, int ncomp,
               const Real* winding, std::vector<Real>& out) {
  const int npts = g.points();
  out.assign(static_cast<size_t>(npts) * ncomp, 0.0);
  const Real inv12h = 1.0 / (12.0 * g.spacing(dir));
  for (int p = 0; p < npts; ++p) {
    const int pm2 = g.shift(p, dir, -2);
    const int pm1 = g.shift(p, dir, -1);
    const int pp1 = g.shift(p, dir, +1);
    const int pp2 = g.shift(p, dir, +2);
    for (int c = 0; c < ncomp; ++c) {
      const Real v = (-field[static_cast<size_t>(pp2) * ncomp + c] +
                      8.0 * field[static_cast<size_t>(pp1) * ncomp + c] -
                      8.0 * field[static_cast<size_t>(pm1) * ncomp + c] +
                      field[static_cast<size_t>(pm2) * ncomp + c]) *
                     inv12h;
      out[static_cast<size_t>(p) * ncomp + c] = v + (winding ? winding[c] : 0.0);
    }
  }
}

inline std::vector<Real> d1(const Grid& g, int dir, const std::vector<Real>& field,
                            int ncomp, const Real* winding = nullptr) {
  std::vector<Real> out;
  d1(g, dir, field, ncomp, winding, out);
  return out;
}

// Second derivative along one direction: the first-difference operator applied
// twice.  Winding contributes only to the first application and drops out.
inline std::vector<Real> d2(const Grid& g, int dir, const std::vector<Real>& field,
                            int ncomp, const Real* winding = nullptr) {
  std::vector<Real> first = d1(g, dir, field, ncomp, winding);
  return d1(g, dir, first, ncomp, nullptr);
}

}  // namespace chime
