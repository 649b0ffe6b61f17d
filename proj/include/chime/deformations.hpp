#pragma once

#include "chime/covariant.hpp"

namespace chime {

// ---------------------------------------------------------------------------
// First-order response of the induced geometry to a deformation delta X of
// the extended embedding.  Formulas take the deformation decomposed along the
// frame: tangential components phi^a (with phi_a lowered by the extended
// metric) and normal components phi^I.
// ---------------------------------------------------------------------------

struct DeformationDecomp {
  std::vector<Real> lower;   // p*W + a   phi_a = <e_a, dX>
  std::vector<Real> upper;   // p*W + a   phi^a
  std::vector<Real> normal;  // p*K + I   phi^I = <n_I, dX>
};

inline DeformationDecomp decompose_deformation(const Patch& pt, const FrameData& fd,
                                               const std::vector<Real>& deltaX) {
  const int W = fd.world, T = fd.total, K = fd.codim;
  const int npts = pt.npts();
  DeformationDecomp dc;
  dc.lower.assign(static_cast<size_t>(npts) * W, 0.0);
  dc.upper.assign(static_cast<size_t>(npts) * W, 0.0);
  dc.normal.assign(static_cast<size_t>(npts) * K, 0.0);
  for (int p = 0; p < npts; ++p) {
    const Real* dX = &deltaX[static_cast<size_t>(p) * T];
    for (int a = 0; a < W; ++a)
      dc.lower[static_cast<size_t>(p) * W + a] = pt.bg.inner(fd.e(p, a), dX);
    const Real* Gi = fd.ginv(p);
    for (int a = 0; a < W; ++a) {
      Real up = 0;
      for (int b = 0; b < W; ++b) up += Gi[a * W + b] * dc.lower[static_cast<size_t>(p) * W + b];
      dc.upper[static_cast<size_t>(p) * W + a] = up;
    }
    for (int I = 0; I < K; ++I)
      dc.normal[static_cast<size_t>(p) * K + I] = pt.bg.inner(fd.nrm(p, I), dX);
  }
  return dc;
}

struct MetricDeformation {
  std::vector<Real> d_metric;      // p,a,b   D Gamma_ab
  std::vector<Real> d_metric_inv;  // p,a,b   D Gamma^ab
  std::vector<Real> d_volume;      // p       D sqrt(-Gamma)
};

// Metric/volume response at slice s to the per-slice deformation deltaX:
//   D Gamma_ab   = 2 K^I_ab phi_I + grad_a phi_b + grad_b phi_a
//   D Gamma^ab   = -(2 K^{ab I} phi_I + grad^a phi^b + grad^b phi^a)
//   D sqrt(-Gamma) = sqrt(-Gamma) (div_a phi^a + K^I phi_I)
// with worldvolume-covariant gradients and the trace K^I = Gamma^ab K^I_ab.
inline MetricDeformation metric_deformation(const Patch& pt, const PatchFrames& pf,
                                            const std::vector<std::vector<Real>>& deltaX,
                                            int s) {
  const FrameData& fd = pf.frames[s];
  const CurvatureData& cd = pf.curv_at(s);
  const int W = fd.world, K = fd.codim;
  const int npts = pt.npts();
  const bool timelike = pt.mode == Mode::Timelike;
  const int lo = timelike ? s - 1 : s;
  const int hi = timelike ? s + 1 : s;
  std::vector<std::vector<Real>> low(deltaX.size()), up(deltaX.size());
  std::vector<Real> nrm;
  for (int q = lo; q <= hi; ++q) {
    const DeformationDecomp dc = decompose_deformation(pt, pf.frames[q], deltaX[q]);
    low[q] = dc.lower;
    up[q] = dc.upper;
    if (q == s) nrm = dc.normal;
  }
  const std::vector<Real> dlow = patch_grad(pt, low, W, s);
  const std::vector<Real> dup = patch_grad(pt, up, W, s);

  MetricDeformation md;
  md.d_metric.assign(static_cast<size_t>(npts) * W * W, 0.0);
  md.d_metric_inv.assign(static_cast<size_t>(npts) * W * W, 0.0);
  md.d_volume.assign(npts, 0.0);
  for (int p = 0; p < npts; ++p) {
    const Real* Gi = fd.ginv(p);
    // Covariant gradient of the lowered tangential part.
    Real cov[kMaxWorld][kMaxWorld];
    for (int a = 0; a < W; ++a)
      for (int b = 0; b < W; ++b) {
        Real v = dlow[(static_cast<size_t>(p) * W + a) * W + b];
        for (int c = 0; c < W; ++c)
          v -= cd.Gam(p, c, a, b) * low[s][static_cast<size_t>(p) * W + c];
        cov[a][b] = v;
      }
    for (int a = 0; a < W; ++a)
      for (int b = 0; b < W; ++b) {
        Real v = cov[a][b] + cov[b][a];
        for (int I = 0; I < K; ++I)
          v += 2.0 * cd.K(p, I, a, b) * nrm[static_cast<size_t>(p) * K + I];
        md.d_metric[static_cast<size_t>(p) * W * W + a * W + b] = v;
      }
    // Raise both indices for the inverse-metric response.
    for (int a = 0; a < W; ++a)
      for (int b = 0; b < W; ++b) {
        Real v = 0;
        for (int c = 0; c < W; ++c)
          for (int d = 0; d < W; ++d)
            v += Gi[a * W + c] * Gi[b * W + d] *
                 md.d_metric[static_cast<size_t>(p) * W * W + c * W + d];
        md.d_metric_inv[static_cast<size_t>(p) * W * W + a * W + b] = -v;
      }
    // Divergence of the raised tangential part plus the curvature trace.
    Real div = 0;
    for (int a = 0; a < W; ++a) {
      div += dup[(static_cast<size_t>(p) * W + a) * W + a];
      for (int c = 0; c < W; ++c)
        div += cd.Gam(p, a, a, c) * up[s][static_cast<size_t>(p) * W + c];
    }
    Real ktrace = 0;
    for (int I = 0; I < K; ++I) {
      Real tr = 0;
      for (int a = 0; a < W; ++a)
        for (int b = 0; b < W; ++b) tr += Gi[a * W + b] * cd.K(p, I, a, b);
      ktrace += tr * nrm[static_cast<size_t>(p) * K + I];
    }
    md.d_volume[p] = fd.volume[p] * (div + ktrace);
  }
  return md;
}

// Quadratic curvature coupling P_ab^{IJ} = K^I_ac Gamma^cd K^J_db at point p.
inline Real curvature_square(const FrameData& fd, const CurvatureData& cd, int p,
                             int I, int J, int a, int b) {
  const int W = fd.world;
  const Real* Gi = fd.ginv(p);
  Real v = 0;
  for (int c = 0; c < W; ++c)
    for (int d = 0; d < W; ++d) v += cd.K(p, I, a, c) * Gi[c * W + d] * cd.K(p, J, d, b);
  return v;
}

// Extrinsic-curvature response to a purely normal deformation phi^I:
//   D K^I_ab = -(tilde D)_a (tilde D)_b phi^I + K^I_ac Gamma^cd K^J_db phi_J,
// symmetrized over (a, b).  out[((p*K + I)*W + a)*W + b].  The sign of the
// second-derivative term pairs with the outward-positive curvature
// convention used here (a circle of radius R has K_ss = +R).
inline std::vector<Real> extrinsic_deformation(const Patch& pt, const PatchFrames& pf,
                                               const std::vector<std::vector<Real>>& phi,
                                               int s) {
  const FrameData& fd = pf.frames[s];
  const CurvatureData& cd = pf.curv_at(s);
  const int W = fd.world, K = fd.codim;
  const int npts = pt.npts();
  const std::vector<Real> hess = tilde_hessian(pt, pf, phi, s);
  std::vector<Real> out(static_cast<size_t>(npts) * K * W * W, 0.0);
  for (int p = 0; p < npts; ++p)
    for (int I = 0; I < K; ++I)
      for (int a = 0; a < W; ++a)
        for (int b = 0; b <= a; ++b) {
          const Real hab = hess[((static_cast<size_t>(p) * W + a) * W + b) * K + I];
          const Real hba = hess[((static_cast<size_t>(p) * W + b) * W + a) * K + I];
          Real v = -0.5 * (hab + hba);
          for (int J = 0; J < K; ++J) {
            const Real pij = 0.5 * (curvature_square(fd, cd, p, I, J, a, b) +
                                    curvature_square(fd, cd, p, I, J, b, a));
            v += pij * phi[s][static_cast<size_t>(p) * K + J];
          }
          out[((static_cast<size_t>(p) * K + I) * W + a) * W + b] = v;
          out[((static_cast<size_t>(p) * K + I) * W + b) * W + a] = v;
        }
  return out;
}

// First variation of the mean-curvature components H^I = Gamma^ab K^I_ab
// under a purely normal deformation (the linearized equation of motion):
//   D H^I = -((tilde Laplacian) phi^I + K^I_ac K^{ac J} phi_J).
// out[p*K + I].  Vanishes when phi connects nearby solutions, e.g. the
// normal part of an ambient isometry applied to an on-shell worldvolume.
inline std::vector<Real> linearized_eom_apply(const Patch& pt, const PatchFrames& pf,
                                              const std::vector<std::vector<Real>>& phi,
                                              int s) {
  const FrameData& fd = pf.frames[s];
  const CurvatureData& cd = pf.curv_at(s);
  const int W = fd.world, K = fd.codim;
  const int npts = pt.npts();
  std::vector<Real> out = tilde_laplacian(pt, pf, phi, s);
  for (int p = 0; p < npts; ++p) {
    const Real* Gi = fd.ginv(p);
    for (int I = 0; I < K; ++I) {
      Real v = 0;
      for (int J = 0; J < K; ++J) {
        Real contraction = 0;
        for (int a = 0; a < W; ++a)
          for (int b = 0; b < W; ++b)
            contraction += Gi[a * W + b] * curvature_square(fd, cd, p, I, J, a, b);
        v += contraction * phi[s][static_cast<size_t>(p) * K + J];
      }
      Real& slot = out[static_cast<size_t>(p) * K + I];
      slot = -(slot + v);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Central-difference oracle: deform the discrete pipeline itself by
// +/- eps and difference the resulting geometry.  The deformed worldvolumes
// reuse the undeformed normals as fixed-order frame candidates, so the frame
// varies continuously with eps and frame-dependent quantities can be
// differenced component by component.
// ---------------------------------------------------------------------------
struct DeformationOracle {
  std::vector<Real> d_metric;      // p,a,b
  std::vector<Real> d_metric_inv;  // p,a,b
  std::vector<Real> d_volume;      // p
  std::vector<Real> d_extrinsic;   // p,I,a,b
  std::vector<Real> d_mean_curv;   // p,I     D (Gamma^ab K^I_ab)
  std::vector<Real> d_chirality;   // p
};

// deltaX must cover every slice; deltaV the inner slices (only they are used).
// The result lives on the centre slice of the patch; the patch needs depth
// >= 5 in Timelike mode so that the trimmed copies still have tau neighbours.
inline DeformationOracle deformation_oracle(const Patch& pt, const PatchFrames& pf,
                                            const std::vector<std::vector<Real>>& deltaX,
                                            const std::vector<std::vector<Real>>& deltaV,
                                            Real eps) {
  const bool timelike = pt.mode == Mode::Timelike;
  const int w0 = timelike ? 1 : 0;
  const int w1 = timelike ? pt.depth - 2 : 0;
  const int T = pt.total_dim();
  require(!timelike || pt.depth >= 5, "deformation_oracle: patch depth must be >= 5");

  auto deformed = [&](Real sign) {
    Patch q;
    q.mode = pt.mode;
    q.grid = pt.grid;
    q.bg = pt.bg;
    q.depth = w1 - w0 + 1;
    q.dtau = pt.dtau;
    q.tau0 = pt.tau0;
    q.winding = pt.winding;
    q.slices.resize(q.depth);
    for (int s = w0; s <= w1; ++s) {
      Slice& sl = q.slices[s - w0];
      sl.xbar = pt.slices[s].xbar;
      for (size_t i = 0; i < sl.xbar.size(); ++i) sl.xbar[i] += sign * eps * deltaX[s][i];
      if (timelike) {
        sl.vbar = pt.slices[s].vbar;
        for (size_t i = 0; i < sl.vbar.size(); ++i)
          sl.vbar[i] += sign * eps * deltaV[s][i];
      }
    }
    q.validate();
    // Frames: basic data plus fixed-order normals carried over from the
    // undeformed slices.
    std::vector<FrameData> frames;
    for (int s = 0; s < q.depth; ++s) {
      FrameData fd = frame_slice_basic(q, s);
      const FrameData& ref = pf.frames[s + w0];
      add_normals_fixed(q, fd, [&ref, T](int p) {
        return std::vector<Real>(ref.nrm(p, 0), ref.nrm(p, 0) + static_cast<size_t>(ref.codim) * T);
      });
      frames.push_back(std::move(fd));
    }
    const int centre = q.depth / 2;
    CurvatureData cd = build_curvature(q, frames, centre);
    return std::tuple<Patch, std::vector<FrameData>, CurvatureData, int>(
        std::move(q), std::move(frames), std::move(cd), centre);
  };

  const auto [qp, fp, cp, cplus] = deformed(+1.0);
  const auto [qm, fm, cm, cminus] = deformed(-1.0);
  const FrameData& fdp = fp[cplus];
  const FrameData& fdm = fm[cminus];

  auto mean_curv = [](const FrameData& fd, const CurvatureData& cd) {
    const int W = fd.world, K = fd.codim;
    const int npts = static_cast<int>(fd.volume.size());
    std::vector<Real> out(static_cast<size_t>(npts) * K, 0.0);
    for (int p = 0; p < npts; ++p) {
      const Real* Gi = fd.ginv(p);
      for (int I = 0; I < K; ++I) {
        Real tr = 0;
        for (int a = 0; a < W; ++a)
          for (int b = 0; b < W; ++b) tr += Gi[a * W + b] * cd.K(p, I, a, b);
        out[static_cast<size_t>(p) * K + I] = tr;
      }
    }
    return out;
  };

  DeformationOracle oc;
  const Real inv2e = 1.0 / (2.0 * eps);
  auto diff = [&](const std::vector<Real>& a, const std::vector<Real>& b) {
    std::vector<Real> out(a.size());
    for (size_t i = 0; i < a.size(); ++i) out[i] = (a[i] - b[i]) * inv2e;
    return out;
  };
  oc.d_metric = diff(fdp.metric, fdm.metric);
  oc.d_metric_inv = diff(fdp.metric_inv, fdm.metric_inv);
  oc.d_volume = diff(fdp.volume, fdm.volume);
  oc.d_chirality = diff(fdp.chirality, fdm.chirality);
  oc.d_extrinsic = diff(cp.extrinsic, cm.extrinsic);
  oc.d_mean_curv = diff(mean_curv(fdp, cp), mean_curv(fdm, cm));
  return oc;
}

// Ambient deformation field and consistent velocity shift generated by
// normal components phi^I: deltaX = phi^I n_I on every slice, deltaV its
// centred tau difference on the inner slices (identical copies in Riemannian
// mode, where no velocity exists).
inline void normal_deformation_fields(const Patch& pt, const PatchFrames& pf,
                                      const std::vector<std::vector<Real>>& phi,
                                      std::vector<std::vector<Real>>& deltaX,
                                      std::vector<std::vector<Real>>& deltaV) {
  const int T = pt.total_dim();
  const int npts = pt.npts();
  deltaX.assign(pt.depth, {});
  deltaV.assign(pt.depth, {});
  for (int s = 0; s < pt.depth; ++s) {
    const FrameData& fd = pf.frames[s];
    std::vector<Real>& dx = deltaX[s];
    dx.assign(static_cast<size_t>(npts) * T, 0.0);
    for (int p = 0; p < npts; ++p)
      for (int I = 0; I < fd.codim; ++I) {
        const Real c = phi[s][static_cast<size_t>(p) * fd.codim + I];
        const Real* n = fd.nrm(p, I);
        for (int mu = 0; mu < T; ++mu) dx[static_cast<size_t>(p) * T + mu] += c * n[mu];
      }
  }
  if (pt.mode == Mode::Timelike) {
    const Real inv2dt = 1.0 / (2.0 * pt.dtau);
    for (int s = 1; s + 1 < pt.depth; ++s) {
      deltaV[s].resize(deltaX[s].size());
      for (size_t i = 0; i < deltaX[s].size(); ++i)
        deltaV[s][i] = (deltaX[s + 1][i] - deltaX[s - 1][i]) * inv2dt;
    }
  }
}

}  // namespace chime
