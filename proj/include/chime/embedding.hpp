#pragma once

#include <vector>

#include "chime/background.hpp"
#include "chime/grid.hpp"

namespace chime {

// One constant-tau slice of the extended embedding.  xbar packs the base
// position X^mu and the compact coordinate phi as the final component, so
// component index base_dim is phi.  vbar is d(xbar)/dtau on the slice.
struct Slice {
  std::vector<Real> xbar;  // npts * total_dim
  std::vector<Real> vbar;  // npts * total_dim (empty in Riemannian mode)
};

enum class Mode { Timelike, Riemannian };

// A stack of consecutive slices around one analysis time.  Spatial
// derivatives act within a slice through the periodic grid; tau derivatives
// act across slices with 2nd-order centred differences.  Riemannian mode has
// a single slice and no tau direction at all.
//
// winding[mu * dim + dir] is the linear slope of component mu along grid
// direction dir (e.g. 1 for X^1 = sigma), shared by all slices.
struct Patch {
  Mode mode = Mode::Timelike;
  Grid grid;
  Background bg;
  int depth = 3;   // odd; 1 in Riemannian mode
  Real dtau = 0.0; // slice separation
  Real tau0 = 0.0; // tau of the centre slice
  std::vector<Slice> slices;
  std::vector<Real> winding;  // total_dim * grid.dim, may be empty (all zero)

  int total_dim() const { return bg.total_dim(); }
  int npts() const { return grid.points(); }
  int centre() const { return depth / 2; }

  // Worldvolume dimension: tau plus the grid directions, or grid only.
  int world_dim() const { return mode == Mode::Timelike ? grid.dim + 1 : grid.dim; }

  const Real* winding_of(int mu) const {
    static const Real zeros[kMaxWorld] = {0, 0, 0};
    if (winding.empty()) return zeros;
    return &winding[static_cast<size_t>(mu) * grid.dim];
  }

  void validate() const {
    bg.validate();
    grid.validate();
    if (mode == Mode::Riemannian) {
      require(depth == 1, "Patch: Riemannian mode is single-slice");
    } else {
      require(depth >= 3 && depth % 2 == 1, "Patch: depth must be odd and >= 3");
      require(dtau > 0, "Patch: slice separation must be positive");
    }
    require(static_cast<int>(slices.size()) == depth, "Patch: slice count != depth");
    const size_t want = static_cast<size_t>(npts()) * total_dim();
    for (const Slice& s : slices) {
      require(s.xbar.size() == want, "Patch: slice field size mismatch");
      if (mode == Mode::Timelike)
        require(s.vbar.size() == want, "Patch: slice velocity size mismatch");
    }
  }
};

// Derivative of a per-slice point-major field along worldvolume direction a.
// In Timelike mode a = 0 is tau (centred difference across slices, valid on
// interior slices only); spatial directions map to a - 1.  In Riemannian mode
// a indexes grid directions directly.
inline std::vector<Real> patch_d1(const Patch& patch,
                                  const std::vector<std::vector<Real>>& per_slice,
                                  int ncomp, int slice, int a,
                                  const Real* winding = nullptr) {
  if (patch.mode == Mode::Timelike && a == 0) {
    require(slice > 0 && slice + 1 < static_cast<int>(per_slice.size()),
            "patch_d1: tau derivative needs both neighbour slices");
    const std::vector<Real>& fp = per_slice[slice + 1];
    const std::vector<Real>& fm = per_slice[slice - 1];
    std::vector<Real> out(fp.size());
    const Real inv2dt = 1.0 / (2.0 * patch.dtau);
    for (size_t i = 0; i < out.size(); ++i) out[i] = (fp[i] - fm[i]) * inv2dt;
    return out;
  }
  const int dir = patch.mode == Mode::Timelike ? a - 1 : a;
  return d1(patch.grid, dir, per_slice[slice], ncomp, winding);
}

}  // namespace chime
