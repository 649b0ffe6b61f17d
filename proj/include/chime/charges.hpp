#pragma once

#include <algorithm>
#include <vector>

#include "chime/frames.hpp"
#include "chime/poisson.hpp"

namespace chime {

// ---------------------------------------------------------------------------
// Worldvolume momentum currents and the global charges they integrate to.
// With both indices up,
//   J^{a mu} = -mu0 * sqrt(-Gamma) * Gamma^{a b} e_b^mu,
// and the tau row J^{tau mu} is the momentum density pi^mu of a spatial
// slice.  On-shell the coordinate divergence d_a J^{a mu} vanishes, so
//   P^mu = sum_p cell * pi^mu(sigma_p)
// is conserved, as is the angular part M^{mu nu} on winding-free cycles.
// The discrete pairs x_{p mu} = X^mu(sigma_p) (winding term restored) and
// rho_{p mu} = g_{mu nu} pi^nu(sigma_p) * cell are canonically conjugate;
// translation and rotation charges are then at most quadratic forms that the
// coefficient engine brackets exactly.
// ---------------------------------------------------------------------------

inline std::vector<Real> momentum_current(const Patch& pt, const FrameData& fd, Real mu0) {
  require(pt.mode == Mode::Timelike, "momentum_current: needs a timelike patch");
  const int W = fd.world, T = fd.total, npts = pt.npts();
  std::vector<Real> out(static_cast<size_t>(npts) * W * T, 0.0);
  for (int p = 0; p < npts; ++p) {
    const Real* gi = fd.ginv(p);
    const Real f = -mu0 * fd.volume[p];
    for (int a = 0; a < W; ++a) {
      Real* row = &out[(static_cast<size_t>(p) * W + a) * T];
      for (int b = 0; b < W; ++b) {
        const Real c = f * gi[a * W + b];
        if (c == 0.0) continue;
        const Real* eb = fd.e(p, b);
        for (int mu = 0; mu < T; ++mu) row[mu] += c * eb[mu];
      }
    }
  }
  return out;
}

// Momentum density with the ambient index lowered: pi_mu = g_{mu nu} J^{tau nu}.
inline std::vector<Real> momentum_density(const Patch& pt, const FrameData& fd, Real mu0) {
  const int W = fd.world, T = fd.total, npts = pt.npts();
  const std::vector<Real> J = momentum_current(pt, fd, mu0);
  std::vector<Real> out(static_cast<size_t>(npts) * T, 0.0);
  for (int p = 0; p < npts; ++p)
    for (int mu = 0; mu < T; ++mu)
      out[static_cast<size_t>(p) * T + mu] =
          pt.bg.metric_diag(mu) * J[static_cast<size_t>(p) * W * T + mu];
  return out;
}

// Full embedding values on a slice: stored periodic residual plus the linear
// winding ramp w * xi.
inline std::vector<Real> full_position(const Patch& pt, int s) {
  const int T = pt.total_dim();
  std::vector<Real> out = pt.slices[s].xbar;
  if (pt.winding.empty()) return out;
  for (int p = 0; p < pt.npts(); ++p) {
    const auto idx = pt.grid.unflat(p);
    for (int mu = 0; mu < T; ++mu) {
      const Real* w = pt.winding_of(mu);
      Real ramp = 0.0;
      for (int d = 0; d < pt.grid.dim; ++d) ramp += w[d] * pt.grid.coord(d, idx[d]);
      out[static_cast<size_t>(p) * T + mu] += ramp;
    }
  }
  return out;
}

struct ChargeSet {
  std::vector<Real> P;  // total_dim entries, index up
  std::vector<Real> M;  // total_dim^2 entries, antisymmetric, indices up

  Real m(int mu, int nu, int total) const { return M[static_cast<size_t>(mu) * total + nu]; }
};

// Trapezoid charges of one slice.  M is meaningful only when the position
// itself is single-valued around the cycle (no winding in mu or nu).
inline ChargeSet integrate_charges(const Patch& pt, const FrameData& fd, int s, Real mu0) {
  const int W = fd.world, T = fd.total, npts = pt.npts();
  const Real cell = pt.grid.cell_measure();
  const std::vector<Real> J = momentum_current(pt, fd, mu0);
  const std::vector<Real> x = full_position(pt, s);
  ChargeSet cs;
  cs.P.assign(T, 0.0);
  cs.M.assign(static_cast<size_t>(T) * T, 0.0);
  for (int p = 0; p < npts; ++p) {
    const Real* pi = &J[static_cast<size_t>(p) * W * T];  // tau row = pi^mu
    const Real* xp = &x[static_cast<size_t>(p) * T];
    for (int mu = 0; mu < T; ++mu) cs.P[mu] += cell * pi[mu];
    for (int mu = 0; mu < T; ++mu)
      for (int nu = mu + 1; nu < T; ++nu) {
        const Real v = cell * (xp[mu] * pi[nu] - xp[nu] * pi[mu]);
        cs.M[static_cast<size_t>(mu) * T + nu] += v;
      }
  }
  for (int mu = 0; mu < T; ++mu)
    for (int nu = mu + 1; nu < T; ++nu)
      cs.M[static_cast<size_t>(nu) * T + mu] = -cs.M[static_cast<size_t>(mu) * T + nu];
  return cs;
}

// Phase-space coordinates z = (x..., rho...) of one slice for the coefficient
// engine.
inline std::vector<Real> phase_point(const Patch& pt, const FrameData& fd, int s, Real mu0,
                                     const PhaseLayout& lay) {
  require(lay.npts == pt.npts() && lay.total == pt.total_dim(),
          "phase_point: layout mismatch");
  const std::vector<Real> x = full_position(pt, s);
  const std::vector<Real> rho = momentum_density(pt, fd, mu0);
  const Real cell = pt.grid.cell_measure();
  std::vector<Real> z(lay.dim(), 0.0);
  for (int p = 0; p < lay.npts; ++p)
    for (int mu = 0; mu < lay.total; ++mu) {
      z[lay.pos(p, mu)] = x[static_cast<size_t>(p) * lay.total + mu];
      z[lay.mom(p, mu)] = cell * rho[static_cast<size_t>(p) * lay.total + mu];
    }
  return z;
}

// P^mu = sum_p g^{mu nu} rho_{p nu}: linear in the momenta.
inline QuadraticCharge momentum_charge(const PhaseLayout& lay, const Background& bg, int mu) {
  QuadraticCharge q;
  const Real gup = 1.0 / bg.metric_diag(mu);
  for (int p = 0; p < lay.npts; ++p) q.add_lin(lay.mom(p, mu), gup);
  return q;
}

// M^{mu nu} = sum_p (x^mu_p g^{nu a} rho_{p a} - x^nu_p g^{mu a} rho_{p a}).
inline QuadraticCharge angular_charge(const PhaseLayout& lay, const Background& bg, int mu,
                                      int nu) {
  QuadraticCharge q;
  const Real gup_mu = 1.0 / bg.metric_diag(mu);
  const Real gup_nu = 1.0 / bg.metric_diag(nu);
  for (int p = 0; p < lay.npts; ++p) {
    q.add_quad(lay.pos(p, mu), lay.mom(p, nu), gup_nu);
    q.add_quad(lay.pos(p, nu), lay.mom(p, mu), -gup_mu);
  }
  return q;
}

// Coordinate divergence d_a J^{a mu} at an interior slice.  The current
// already carries the volume density, so this residual vanishing (to
// truncation order) is local momentum conservation.  Only tangents and
// metrics enter the current, so the frames are built slice-locally here.
inline std::vector<Real> current_divergence(const Patch& pt, int s, Real mu0) {
  require(pt.mode == Mode::Timelike, "current_divergence: needs a timelike patch");
  require(s >= 1 && s + 1 < pt.depth, "current_divergence: interior slices only");
  const int W = pt.world_dim(), T = pt.total_dim(), npts = pt.npts();
  std::vector<std::vector<Real>> J(pt.depth);
  for (int k = s - 1; k <= s + 1; ++k) {
    const FrameData fd = frame_slice_basic(pt, k);
    J[k] = momentum_current(pt, fd, mu0);
  }
  std::vector<Real> out(static_cast<size_t>(npts) * T, 0.0);
  for (int a = 0; a < W; ++a) {
    const std::vector<Real> dJ = patch_d1(pt, J, W * T, s, a);
    for (int p = 0; p < npts; ++p)
      for (int mu = 0; mu < T; ++mu)
        out[static_cast<size_t>(p) * T + mu] += dJ[(static_cast<size_t>(p) * W + a) * T + mu];
  }
  return out;
}

}  // namespace chime
