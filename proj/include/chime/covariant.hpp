#pragma once

#include "chime/frames.hpp"

namespace chime {

// Frames on every slice plus connection data on the slices that have both
// tau neighbours (all slices in Riemannian mode).
struct PatchFrames {
  std::vector<FrameData> frames;
  std::vector<CurvatureData> curv;
  int curv_offset = 0;  // slice index of curv[0]

  const CurvatureData& curv_at(int s) const { return curv[s - curv_offset]; }
  bool has_curv(int s) const {
    return s >= curv_offset && s - curv_offset < static_cast<int>(curv.size());
  }
};

inline PatchFrames build_patch_frames(const Patch& pt, const SeedFn& seeds = {}) {
  PatchFrames pf;
  pf.frames = build_frames(pt, seeds);
  if (pt.mode == Mode::Riemannian) {
    pf.curv_offset = 0;
    pf.curv.push_back(build_curvature(pt, pf.frames, 0));
  } else {
    pf.curv_offset = 1;
    for (int s = 1; s + 1 < pt.depth; ++s)
      pf.curv.push_back(build_curvature(pt, pf.frames, s));
  }
  return pf;
}

// ---------------------------------------------------------------------------
// Derivatives of per-slice point-major fields.  `field[s]` holds ncomp reals
// per point on slice s; tau derivatives are centred across slices.
// ---------------------------------------------------------------------------

// All worldvolume first derivatives at slice s: out[(p*W + a)*ncomp + c].
inline std::vector<Real> patch_grad(const Patch& pt,
                                    const std::vector<std::vector<Real>>& field,
                                    int ncomp, int s) {
  const int W = pt.world_dim();
  const int npts = pt.npts();
  std::vector<Real> out(static_cast<size_t>(npts) * W * ncomp, 0.0);
  for (int a = 0; a < W; ++a) {
    const std::vector<Real> da = patch_d1(pt, field, ncomp, s, a);
    for (int p = 0; p < npts; ++p)
      for (int c = 0; c < ncomp; ++c)
        out[(static_cast<size_t>(p) * W + a) * ncomp + c] =
            da[static_cast<size_t>(p) * ncomp + c];
  }
  return out;
}

// Symmetrized second derivatives at slice s:
// out[((p*W + a)*W + b)*ncomp + c].  Needs two slices on each side of s for
// the tau-tau entry in Timelike mode.
inline std::vector<Real> patch_hessian(const Patch& pt,
                                       const std::vector<std::vector<Real>>& field,
                                       int ncomp, int s) {
  const int W = pt.world_dim();
  const int npts = pt.npts();
  const bool timelike = pt.mode == Mode::Timelike;
  // First derivatives on s and, when needed, its tau neighbours.
  std::vector<std::vector<Real>> grads(field.size());
  const int lo = timelike ? s - 1 : s;
  const int hi = timelike ? s + 1 : s;
  for (int q = lo; q <= hi; ++q) grads[q] = patch_grad(pt, field, ncomp, q);
  std::vector<Real> out(static_cast<size_t>(npts) * W * W * ncomp, 0.0);
  for (int a = 0; a < W; ++a) {
    const std::vector<Real> dga = patch_d1(pt, grads, W * ncomp, s, a);
    for (int p = 0; p < npts; ++p)
      for (int b = 0; b < W; ++b)
        for (int c = 0; c < ncomp; ++c)
          out[((static_cast<size_t>(p) * W + a) * W + b) * ncomp + c] =
              dga[(static_cast<size_t>(p) * W + b) * ncomp + c];
  }
  // Symmetrize (mixed stencils commute, but roundoff does not).
  for (int p = 0; p < npts; ++p)
    for (int a = 0; a < W; ++a)
      for (int b = 0; b < a; ++b)
        for (int c = 0; c < ncomp; ++c) {
          Real& x = out[((static_cast<size_t>(p) * W + a) * W + b) * ncomp + c];
          Real& y = out[((static_cast<size_t>(p) * W + b) * W + a) * ncomp + c];
          const Real avg = 0.5 * (x + y);
          x = avg;
          y = avg;
        }
  return out;
}

// Scalar d'Alembertian of each component on the extended induced metric:
// box f = Gamma^ab (D_a D_b f - Gamma^c_ab D_c f), out[p*ncomp + c].
inline std::vector<Real> box_scalar(const Patch& pt, const PatchFrames& pf,
                                    const std::vector<std::vector<Real>>& field,
                                    int ncomp, int s) {
  const int W = pt.world_dim();
  const int npts = pt.npts();
  const FrameData& fd = pf.frames[s];
  const CurvatureData& cd = pf.curv_at(s);
  const std::vector<Real> grad = patch_grad(pt, field, ncomp, s);
  const std::vector<Real> hess = patch_hessian(pt, field, ncomp, s);
  std::vector<Real> out(static_cast<size_t>(npts) * ncomp, 0.0);
  for (int p = 0; p < npts; ++p) {
    const Real* Gi = fd.ginv(p);
    for (int c = 0; c < ncomp; ++c) {
      Real sum = 0;
      for (int a = 0; a < W; ++a)
        for (int b = 0; b < W; ++b) {
          Real v = hess[((static_cast<size_t>(p) * W + a) * W + b) * ncomp + c];
          for (int e = 0; e < W; ++e)
            v -= cd.Gam(p, e, a, b) * grad[(static_cast<size_t>(p) * W + e) * ncomp + c];
          sum += Gi[a * W + b] * v;
        }
      out[static_cast<size_t>(p) * ncomp + c] = sum;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Covariant derivatives on the normal bundle.  phi[s] packs K reals per point
// (one per normal).  The twist acts as the bundle connection:
//   (tilde D)_a phi^I = D_a phi^I - omega_a^{IJ} phi^J.
// ---------------------------------------------------------------------------

// out[(p*W + a)*K + I] at slice s.
inline std::vector<Real> tilde_grad(const Patch& pt, const PatchFrames& pf,
                                    const std::vector<std::vector<Real>>& phi,
                                    int s) {
  const int W = pt.world_dim();
  const int K = pf.frames[s].codim;
  const int npts = pt.npts();
  const CurvatureData& cd = pf.curv_at(s);
  std::vector<Real> out = patch_grad(pt, phi, K, s);
  for (int p = 0; p < npts; ++p)
    for (int a = 0; a < W; ++a)
      for (int I = 0; I < K; ++I) {
        Real corr = 0;
        for (int J = 0; J < K; ++J)
          corr += cd.om(p, a, I, J) * phi[s][static_cast<size_t>(p) * K + J];
        out[(static_cast<size_t>(p) * W + a) * K + I] -= corr;
      }
  return out;
}

// Second normal-bundle derivative, with the worldvolume connection acting on
// the lower index b: out[((p*W + a)*W + b)*K + I].
inline std::vector<Real> tilde_hessian(const Patch& pt, const PatchFrames& pf,
                                       const std::vector<std::vector<Real>>& phi,
                                       int s) {
  const int W = pt.world_dim();
  const int K = pf.frames[s].codim;
  const int npts = pt.npts();
  const bool timelike = pt.mode == Mode::Timelike;
  const int lo = timelike ? s - 1 : s;
  const int hi = timelike ? s + 1 : s;
  std::vector<std::vector<Real>> tg(phi.size());
  for (int q = lo; q <= hi; ++q) tg[q] = tilde_grad(pt, pf, phi, q);
  const CurvatureData& cd = pf.curv_at(s);
  std::vector<Real> out(static_cast<size_t>(npts) * W * W * K, 0.0);
  for (int a = 0; a < W; ++a) {
    const std::vector<Real> dga = patch_d1(pt, tg, W * K, s, a);
    for (int p = 0; p < npts; ++p)
      for (int b = 0; b < W; ++b)
        for (int I = 0; I < K; ++I) {
          Real v = dga[(static_cast<size_t>(p) * W + b) * K + I];
          for (int c = 0; c < W; ++c)
            v -= cd.Gam(p, c, a, b) * tg[s][(static_cast<size_t>(p) * W + c) * K + I];
          for (int J = 0; J < K; ++J)
            v -= cd.om(p, a, I, J) * tg[s][(static_cast<size_t>(p) * W + b) * K + J];
          out[((static_cast<size_t>(p) * W + a) * W + b) * K + I] = v;
        }
  }
  return out;
}

// Bundle Laplacian Gamma^ab (tilde D)_a (tilde D)_b phi^I: out[p*K + I].
inline std::vector<Real> tilde_laplacian(const Patch& pt, const PatchFrames& pf,
                                         const std::vector<std::vector<Real>>& phi,
                                         int s) {
  const int W = pt.world_dim();
  const int K = pf.frames[s].codim;
  const int npts = pt.npts();
  const std::vector<Real> hess = tilde_hessian(pt, pf, phi, s);
  const FrameData& fd = pf.frames[s];
  std::vector<Real> out(static_cast<size_t>(npts) * K, 0.0);
  for (int p = 0; p < npts; ++p) {
    const Real* Gi = fd.ginv(p);
    for (int I = 0; I < K; ++I) {
      Real sum = 0;
      for (int a = 0; a < W; ++a)
        for (int b = 0; b < W; ++b)
          sum += Gi[a * W + b] * hess[((static_cast<size_t>(p) * W + a) * W + b) * K + I];
      out[static_cast<size_t>(p) * K + I] = sum;
    }
  }
  return out;
}

}  // namespace chime
