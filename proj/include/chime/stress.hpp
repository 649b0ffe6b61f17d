#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "chime/covariant.hpp"

namespace chime {

// ---------------------------------------------------------------------------
// Auxiliary-variable stress framework: a reparametrization-invariant density
// H(Gamma_ab, K^I_ab) is promoted to a constrained functional whose
// stationarity fixes all Lagrange multipliers in closed form,
//   Lambda^{ab}_I   = -dH/dK^I_ab,
//   T^{ab}          = 2 dH/dGamma_ab + H Gamma^{ab},
//   lambda^{ab}     = T^{ab} / 2,
//   lambda^a_perp,I = -tildeDiv_b Lambda^{ba}_I,
//   lambda_IJ       = (1/2) Lambda^{ab}_(I K^J)_ab,
//   phi^a_IJ        = -Lambda^{ab}_[I n_J] . e_b     (machine zero),
// and assembles the stress vector
//   f^a = (Lambda^{ab}_I K_b^{cI} + 2 lambda^{ac}) e_c - lambda^a_perp,I n^I
//       = F^{ab} e_b + F^{aI} n_I.
// T^{ab} uses the standard inverse-metric variation (raised indices), so the
// constant density H = -mu0 yields T^{ab} = -mu0 Gamma^{ab} and
// f^a = -mu0 Gamma^{ab} e_b, whose volume-weighted form equals the momentum
// current of the charge layer identically.
// ---------------------------------------------------------------------------

// Pointwise density inputs: extended metric, its inverse, and the extrinsic
// curvature block (codim * W * W).
struct DensityInputs {
  int world = 0;
  int codim = 0;
  const Real* metric = nullptr;
  const Real* metric_inv = nullptr;
  const Real* extrinsic = nullptr;

  Real g(int a, int b) const { return metric[a * world + b]; }
  Real gi(int a, int b) const { return metric_inv[a * world + b]; }
  Real k(int I, int a, int b) const {
    return extrinsic[(static_cast<size_t>(I) * world + a) * world + b];
  }
  Real mean_curv(int I) const {
    Real acc = 0.0;
    for (int a = 0; a < world; ++a)
      for (int b = 0; b < world; ++b) acc += gi(a, b) * k(I, a, b);
    return acc;
  }
};

// Scalar density with optional analytic partials.  The metric partial is the
// coefficient of dGamma_ab with every (a,b) entry summed independently (so it
// is symmetric); the curvature partial likewise per normal leg.
struct HamiltonianDensity {
  std::string id;
  std::function<Real(const DensityInputs&)> eval;
  std::function<std::vector<Real>(const DensityInputs&)> d_metric;  // W*W
  std::function<std::vector<Real>(const DensityInputs&)> d_curv;    // codim*W*W
};

inline HamiltonianDensity make_constant_density(Real mu0) {
  HamiltonianDensity h;
  h.id = "constant";
  h.eval = [mu0](const DensityInputs&) { return -mu0; };
  h.d_metric = [](const DensityInputs& in) {
    return std::vector<Real>(static_cast<size_t>(in.world) * in.world, 0.0);
  };
  h.d_curv = [](const DensityInputs& in) {
    return std::vector<Real>(static_cast<size_t>(in.codim) * in.world * in.world, 0.0);
  };
  return h;
}

// H = -mu0 + alpha K^I K_I with K^I = Gamma^{ab} K^I_ab; exists to exercise
// nonzero Lambda / lambda_perp / twist couplings.
inline HamiltonianDensity make_curvature_quadratic_density(Real mu0, Real alpha) {
  HamiltonianDensity h;
  h.id = "curvature_quadratic";
  h.eval = [mu0, alpha](const DensityInputs& in) {
    Real acc = 0.0;
    for (int I = 0; I < in.codim; ++I) {
      const Real k = in.mean_curv(I);
      acc += k * k;
    }
    return -mu0 + alpha * acc;
  };
  h.d_metric = [alpha](const DensityInputs& in) {
    const int W = in.world;
    std::vector<Real> out(static_cast<size_t>(W) * W, 0.0);
    for (int I = 0; I < in.codim; ++I) {
      const Real k = in.mean_curv(I);
      for (int a = 0; a < W; ++a)
        for (int b = 0; b < W; ++b) {
          Real kup = 0.0;
          for (int c = 0; c < W; ++c)
            for (int d = 0; d < W; ++d) kup += in.gi(a, c) * in.gi(b, d) * in.k(I, c, d);
          out[a * W + b] -= 2.0 * alpha * k * kup;
        }
    }
    return out;
  };
  h.d_curv = [alpha](const DensityInputs& in) {
    const int W = in.world;
    std::vector<Real> out(static_cast<size_t>(in.codim) * W * W, 0.0);
    for (int I = 0; I < in.codim; ++I) {
      const Real k = in.mean_curv(I);
      for (int a = 0; a < W; ++a)
        for (int b = 0; b < W; ++b)
          out[(static_cast<size_t>(I) * W + a) * W + b] = 2.0 * alpha * k * in.gi(a, b);
    }
    return out;
  };
  return h;
}

// Central-difference partials; entry pairs are perturbed together so the
// symmetric-sum convention above is matched exactly.
inline std::vector<Real> density_metric_partials_fd(const HamiltonianDensity& h,
                                                    const DensityInputs& in,
                                                    Real eps = 1e-6) {
  const int W = in.world;
  std::vector<Real> out(static_cast<size_t>(W) * W, 0.0);
  auto eval_shifted = [&](int a, int b, Real s) {
    SmallMat g;
    g.n = W;
    for (int i = 0; i < W; ++i)
      for (int j = 0; j < W; ++j) g(i, j) = in.g(i, j);
    g(a, b) += s;
    if (a != b) g(b, a) += s;
    const SmallMat gi = inverse(g, det(g));
    std::array<Real, kMaxWorld * kMaxWorld> gf{}, gif{};
    for (int i = 0; i < W; ++i)
      for (int j = 0; j < W; ++j) {
        gf[i * W + j] = g(i, j);
        gif[i * W + j] = gi(i, j);
      }
    DensityInputs shifted = in;
    shifted.metric = gf.data();
    shifted.metric_inv = gif.data();
    return h.eval(shifted);
  };
  for (int a = 0; a < W; ++a)
    for (int b = a; b < W; ++b) {
      const Real d = (eval_shifted(a, b, eps) - eval_shifted(a, b, -eps)) / (2.0 * eps);
      const Real v = a == b ? d : 0.5 * d;
      out[a * W + b] = v;
      out[b * W + a] = v;
    }
  return out;
}

inline std::vector<Real> density_curv_partials_fd(const HamiltonianDensity& h,
                                                  const DensityInputs& in,
                                                  Real eps = 1e-6) {
  const int W = in.world, K = in.codim;
  std::vector<Real> out(static_cast<size_t>(K) * W * W, 0.0);
  std::vector<Real> kbuf(in.extrinsic, in.extrinsic + static_cast<size_t>(K) * W * W);
  DensityInputs shifted = in;
  shifted.extrinsic = kbuf.data();
  auto entry = [&](int I, int a, int b) -> Real& {
    return kbuf[(static_cast<size_t>(I) * W + a) * W + b];
  };
  for (int I = 0; I < K; ++I)
    for (int a = 0; a < W; ++a)
      for (int b = a; b < W; ++b) {
        auto eval_shifted = [&](Real s) {
          entry(I, a, b) += s;
          if (a != b) entry(I, b, a) += s;
          const Real v = h.eval(shifted);
          entry(I, a, b) -= s;
          if (a != b) entry(I, b, a) -= s;
          return v;
        };
        const Real d = (eval_shifted(eps) - eval_shifted(-eps)) / (2.0 * eps);
        const Real v = a == b ? d : 0.5 * d;
        out[(static_cast<size_t>(I) * W + a) * W + b] = v;
        out[(static_cast<size_t>(I) * W + b) * W + a] = v;
      }
  return out;
}

inline std::vector<Real> density_metric_partials(const HamiltonianDensity& h,
                                                 const DensityInputs& in) {
  return h.d_metric ? h.d_metric(in) : density_metric_partials_fd(h, in);
}

inline std::vector<Real> density_curv_partials(const HamiltonianDensity& h,
                                               const DensityInputs& in) {
  return h.d_curv ? h.d_curv(in) : density_curv_partials_fd(h, in);
}

// Largest relative mismatch between analytic partials and their
// central-difference counterparts at one point.
inline Real validate_density(const HamiltonianDensity& h, const DensityInputs& in) {
  require(static_cast<bool>(h.d_metric) && static_cast<bool>(h.d_curv),
          "validate_density: no analytic partials to validate");
  Real scale = std::abs(h.eval(in));
  const std::vector<Real> am = h.d_metric(in);
  const std::vector<Real> fm = density_metric_partials_fd(h, in);
  const std::vector<Real> ak = h.d_curv(in);
  const std::vector<Real> fk = density_curv_partials_fd(h, in);
  for (Real v : am) scale = std::max(scale, std::abs(v));
  for (Real v : ak) scale = std::max(scale, std::abs(v));
  scale = std::max(scale, 1.0);
  Real worst = 0.0;
  for (size_t i = 0; i < am.size(); ++i) worst = std::max(worst, std::abs(am[i] - fm[i]));
  for (size_t i = 0; i < ak.size(); ++i) worst = std::max(worst, std::abs(ak[i] - fk[i]));
  return worst / scale;
}

inline DensityInputs density_inputs_at(const FrameData& fd, const CurvatureData& cd, int p) {
  DensityInputs in;
  in.world = fd.world;
  in.codim = fd.codim;
  in.metric = fd.g(p);
  in.metric_inv = fd.ginv(p);
  in.extrinsic =
      &cd.extrinsic[static_cast<size_t>(p) * fd.codim * fd.world * fd.world];
  return in;
}

// Lambda^{ab}_I on slice k, layout (p, I, a, b) matching CurvatureData.
inline std::vector<Real> curv_multiplier_field(const Patch& pt, const PatchFrames& pf,
                                               int k, const HamiltonianDensity& h) {
  require(pf.has_curv(k), "curv_multiplier_field: no curvature data on slice");
  const FrameData& fd = pf.frames[k];
  const CurvatureData& cd = pf.curv_at(k);
  const int W = fd.world, K = fd.codim, npts = pt.npts();
  std::vector<Real> out(static_cast<size_t>(npts) * K * W * W, 0.0);
  for (int p = 0; p < npts; ++p) {
    const std::vector<Real> dk = density_curv_partials(h, density_inputs_at(fd, cd, p));
    for (size_t i = 0; i < dk.size(); ++i)
      out[static_cast<size_t>(p) * K * W * W + i] = -dk[i];
  }
  return out;
}

// tildeDiv_a L^{ab}_I of a (p, I, a, b) field: worldvolume Christoffels on
// both coordinate legs, twist connection on the frame leg.  Output (p, b, I).
inline std::vector<Real> multiplier_tilde_divergence(
    const Patch& pt, const PatchFrames& pf, int s,
    const std::vector<std::vector<Real>>& L) {
  const FrameData& fd = pf.frames[s];
  const CurvatureData& cd = pf.curv_at(s);
  const int W = fd.world, K = fd.codim, npts = pt.npts();
  const int ncomp = K * W * W;
  auto at = [&](int p, int I, int a, int b) {
    return L[s][(static_cast<size_t>(p) * K + I) * W * W + a * W + b];
  };
  std::vector<Real> out(static_cast<size_t>(npts) * W * K, 0.0);
  for (int a = 0; a < W; ++a) {
    const std::vector<Real> dL = patch_d1(pt, L, ncomp, s, a);
    for (int p = 0; p < npts; ++p)
      for (int I = 0; I < K; ++I)
        for (int b = 0; b < W; ++b) {
          Real acc = dL[(static_cast<size_t>(p) * K + I) * W * W + a * W + b];
          for (int c = 0; c < W; ++c)
            acc += cd.Gam(p, a, a, c) * at(p, I, c, b) + cd.Gam(p, b, a, c) * at(p, I, a, c);
          for (int J = 0; J < K; ++J) acc -= cd.om(p, a, I, J) * at(p, J, a, b);
          out[(static_cast<size_t>(p) * W + b) * K + I] += acc;
        }
  }
  return out;
}

struct MultiplierSet {
  int world = 0, codim = 0, total = 0;
  std::vector<Real> density;    // p                 H value
  std::vector<Real> Lambda;     // p, I, a, b
  std::vector<Real> T;          // p, a, b
  std::vector<Real> lam;        // p, a, b           T/2
  std::vector<Real> lam_perp;   // p, a, I
  std::vector<Real> lam_IJ;     // p, I, J           symmetric
  std::vector<Real> phi_twist;  // p, a, I, J        antisymmetric in IJ
  std::vector<Real> f;          // p, a, mu
  std::vector<Real> F_tan;      // p, a, b           F^{ab}
  std::vector<Real> F_nor;      // p, a, I           F^{aI} = -lambda^a_perp,I

  Real lambda_at(int p, int I, int a, int b) const {
    return Lambda[(static_cast<size_t>(p) * codim + I) * world * world + a * world + b];
  }
  Real f_at(int p, int a, int mu) const {
    return f[(static_cast<size_t>(p) * world + a) * total + mu];
  }
  Real ftan_at(int p, int a, int b) const {
    return F_tan[(static_cast<size_t>(p) * world + a) * world + b];
  }
  Real fnor_at(int p, int a, int I) const {
    return F_nor[(static_cast<size_t>(p) * world + a) * codim + I];
  }
};

// Solve every multiplier on slice s and assemble the stress vector.  When the
// curvature multiplier vanishes identically on the slice, its divergence is
// skipped, so the constant density works on any slice carrying curvature
// data; otherwise the two tau neighbours need curvature data as well.
inline MultiplierSet solve_multipliers(const Patch& pt, const PatchFrames& pf, int s,
                                       const HamiltonianDensity& h) {
  const FrameData& fd = pf.frames[s];
  const CurvatureData& cd = pf.curv_at(s);
  const int W = fd.world, K = fd.codim, T = fd.total, npts = pt.npts();
  MultiplierSet ms;
  ms.world = W;
  ms.codim = K;
  ms.total = T;
  ms.density.assign(npts, 0.0);
  ms.Lambda = curv_multiplier_field(pt, pf, s, h);
  ms.T.assign(static_cast<size_t>(npts) * W * W, 0.0);
  ms.lam.assign(static_cast<size_t>(npts) * W * W, 0.0);
  ms.lam_perp.assign(static_cast<size_t>(npts) * W * K, 0.0);
  ms.lam_IJ.assign(static_cast<size_t>(npts) * K * K, 0.0);
  ms.phi_twist.assign(static_cast<size_t>(npts) * W * K * K, 0.0);
  ms.f.assign(static_cast<size_t>(npts) * W * T, 0.0);
  ms.F_tan.assign(static_cast<size_t>(npts) * W * W, 0.0);
  ms.F_nor.assign(static_cast<size_t>(npts) * W * K, 0.0);

  for (int p = 0; p < npts; ++p) {
    const DensityInputs in = density_inputs_at(fd, cd, p);
    ms.density[p] = h.eval(in);
    const std::vector<Real> dg = density_metric_partials(h, in);
    Real* t = &ms.T[static_cast<size_t>(p) * W * W];
    Real* l = &ms.lam[static_cast<size_t>(p) * W * W];
    for (int a = 0; a < W; ++a)
      for (int b = 0; b < W; ++b) {
        t[a * W + b] = 2.0 * dg[a * W + b] + ms.density[p] * in.gi(a, b);
        l[a * W + b] = 0.5 * t[a * W + b];
      }
    for (int I = 0; I < K; ++I)
      for (int J = 0; J < K; ++J) {
        Real acc = 0.0;
        for (int a = 0; a < W; ++a)
          for (int b = 0; b < W; ++b)
            acc += ms.lambda_at(p, I, a, b) * cd.K(p, J, a, b) +
                   ms.lambda_at(p, J, a, b) * cd.K(p, I, a, b);
        ms.lam_IJ[(static_cast<size_t>(p) * K + I) * K + J] = 0.25 * acc;
      }
  }

  if (max_abs(ms.Lambda) != 0.0) {
    std::vector<std::vector<Real>> L(pt.depth);
    if (pt.mode == Mode::Timelike) {
      for (int k = s - 1; k <= s + 1; ++k) L[k] = curv_multiplier_field(pt, pf, k, h);
    } else {
      L[s] = ms.Lambda;
    }
    const std::vector<Real> div = multiplier_tilde_divergence(pt, pf, s, L);
    for (size_t i = 0; i < div.size(); ++i) ms.lam_perp[i] = -div[i];
    // phi^a_IJ = -Lambda^{ab}_I n_J . e_b, antisymmetrized over IJ; with an
    // orthonormal frame this is machine zero but it is kept as a diagnostic.
    for (int p = 0; p < npts; ++p)
      for (int a = 0; a < W; ++a)
        for (int I = 0; I < K; ++I)
          for (int J = 0; J < I; ++J) {
            Real acc = 0.0;
            for (int b = 0; b < W; ++b)
              acc += ms.lambda_at(p, I, a, b) * pt.bg.inner(fd.nrm(p, J), fd.e(p, b)) -
                     ms.lambda_at(p, J, a, b) * pt.bg.inner(fd.nrm(p, I), fd.e(p, b));
            const Real v = -0.5 * acc;
            ms.phi_twist[((static_cast<size_t>(p) * W + a) * K + I) * K + J] = v;
            ms.phi_twist[((static_cast<size_t>(p) * W + a) * K + J) * K + I] = -v;
          }
  }

  for (int p = 0; p < npts; ++p) {
    Real* ftan = &ms.F_tan[static_cast<size_t>(p) * W * W];
    const Real* gi = fd.ginv(p);
    for (int a = 0; a < W; ++a)
      for (int c = 0; c < W; ++c) {
        Real acc = 2.0 * ms.lam[static_cast<size_t>(p) * W * W + a * W + c];
        for (int I = 0; I < K; ++I)
          for (int b = 0; b < W; ++b)
            for (int d = 0; d < W; ++d)
              acc += ms.lambda_at(p, I, a, b) * gi[c * W + d] * cd.K(p, I, b, d);
        ftan[a * W + c] = acc;
      }
    for (int a = 0; a < W; ++a)
      for (int I = 0; I < K; ++I)
        ms.F_nor[(static_cast<size_t>(p) * W + a) * K + I] =
            -ms.lam_perp[(static_cast<size_t>(p) * W + a) * K + I];
    Real* fa = &ms.f[static_cast<size_t>(p) * W * T];
    for (int a = 0; a < W; ++a)
      for (int mu = 0; mu < T; ++mu) {
        Real acc = 0.0;
        for (int c = 0; c < W; ++c) acc += ftan[a * W + c] * fd.e(p, c)[mu];
        for (int I = 0; I < K; ++I)
          acc += ms.F_nor[(static_cast<size_t>(p) * W + a) * K + I] * fd.nrm(p, I)[mu];
        fa[a * T + mu] = acc;
      }
  }
  return ms;
}

// Residual of the frame-variation stationarity condition: substituting the
// solved multipliers back into
//   (tildeDiv_a Lambda^{ab}_I + lambda^b_perp,I) e_b
//     + (2 lambda_I^J - Lambda^{ab}_I K^J_ab) n_J = 0
// must leave roundoff only.  Returns the max-norm over points, legs and
// ambient components.
inline Real stationarity_residual(const Patch& pt, const PatchFrames& pf, int s,
                                  const HamiltonianDensity& h, const MultiplierSet& ms) {
  const FrameData& fd = pf.frames[s];
  const CurvatureData& cd = pf.curv_at(s);
  const int W = fd.world, K = fd.codim, T = fd.total, npts = pt.npts();
  std::vector<Real> div(static_cast<size_t>(npts) * W * K, 0.0);
  if (max_abs(ms.Lambda) != 0.0) {
    std::vector<std::vector<Real>> L(pt.depth);
    if (pt.mode == Mode::Timelike) {
      for (int k = s - 1; k <= s + 1; ++k) L[k] = curv_multiplier_field(pt, pf, k, h);
    } else {
      L[s] = ms.Lambda;
    }
    div = multiplier_tilde_divergence(pt, pf, s, L);
  }
  Real worst = 0.0;
  std::vector<Real> r(T, 0.0);
  for (int p = 0; p < npts; ++p)
    for (int I = 0; I < K; ++I) {
      std::fill(r.begin(), r.end(), 0.0);
      for (int b = 0; b < W; ++b) {
        const Real tan = div[(static_cast<size_t>(p) * W + b) * K + I] +
                         ms.lam_perp[(static_cast<size_t>(p) * W + b) * K + I];
        for (int mu = 0; mu < T; ++mu) r[mu] += tan * fd.e(p, b)[mu];
      }
      for (int J = 0; J < K; ++J) {
        Real nor = 2.0 * ms.lam_IJ[(static_cast<size_t>(p) * K + I) * K + J];
        for (int a = 0; a < W; ++a)
          for (int b = 0; b < W; ++b)
            nor -= ms.lambda_at(p, I, a, b) * cd.K(p, J, a, b);
        for (int mu = 0; mu < T; ++mu) r[mu] += nor * fd.nrm(p, J)[mu];
      }
      for (int mu = 0; mu < T; ++mu) worst = std::max(worst, std::abs(r[mu]));
    }
  return worst;
}

// Volume-weighted stress current sqrt(-Gamma) f^{a mu} on slice k.
inline std::vector<Real> stress_current(const Patch& pt, const PatchFrames& pf, int k,
                                        const HamiltonianDensity& h) {
  const MultiplierSet ms = solve_multipliers(pt, pf, k, h);
  const FrameData& fd = pf.frames[k];
  const int W = fd.world, T = fd.total, npts = pt.npts();
  std::vector<Real> out(static_cast<size_t>(npts) * W * T, 0.0);
  for (int p = 0; p < npts; ++p)
    for (int a = 0; a < W; ++a)
      for (int mu = 0; mu < T; ++mu)
        out[(static_cast<size_t>(p) * W + a) * T + mu] = fd.volume[p] * ms.f_at(p, a, mu);
  return out;
}

// Coordinate divergence d_a (sqrt(-Gamma) f^{a mu}) at slice s; vanishing to
// truncation order expresses the conservation law on-shell.
inline std::vector<Real> stress_conservation_residual(const Patch& pt, const PatchFrames& pf,
                                                      int s, const HamiltonianDensity& h) {
  const int W = pt.world_dim(), T = pt.total_dim(), npts = pt.npts();
  std::vector<std::vector<Real>> cur(pt.depth);
  if (pt.mode == Mode::Timelike) {
    for (int k = s - 1; k <= s + 1; ++k) cur[k] = stress_current(pt, pf, k, h);
  } else {
    cur[s] = stress_current(pt, pf, s, h);
  }
  std::vector<Real> out(static_cast<size_t>(npts) * T, 0.0);
  for (int a = 0; a < W; ++a) {
    const std::vector<Real> d = patch_d1(pt, cur, W * T, s, a);
    for (int p = 0; p < npts; ++p)
      for (int mu = 0; mu < T; ++mu)
        out[static_cast<size_t>(p) * T + mu] += d[(static_cast<size_t>(p) * W + a) * T + mu];
  }
  return out;
}

// Both rows of the equations of motion derived from the stress:
//   tangential: div_a F^{ab} + K_a^{bI} F^{aI}        (p, b)
//   normal:     tildeDiv_a F^{aI} - F^{ab} K^I_ab     (p, I)
// For the constant density F^{aI} = 0 and the normal row reduces to
// mu0 Gamma^{ab} K^I_ab, the mean-curvature form of the dynamics.
struct EomRows {
  std::vector<Real> tangential;
  std::vector<Real> normal;
};

inline EomRows eom_from_stress(const Patch& pt, const PatchFrames& pf, int s,
                               const HamiltonianDensity& h) {
  const FrameData& fd = pf.frames[s];
  const CurvatureData& cd = pf.curv_at(s);
  const int W = fd.world, K = fd.codim, npts = pt.npts();

  std::vector<MultiplierSet> sets(pt.depth);
  std::vector<std::vector<Real>> Ftan(pt.depth), Fnor(pt.depth);
  const int lo = pt.mode == Mode::Timelike ? s - 1 : s;
  const int hi = pt.mode == Mode::Timelike ? s + 1 : s;
  for (int k = lo; k <= hi; ++k) {
    sets[k] = solve_multipliers(pt, pf, k, h);
    Ftan[k] = sets[k].F_tan;
    Fnor[k] = sets[k].F_nor;
  }
  const MultiplierSet& msc = sets[s];

  EomRows rows;
  rows.tangential.assign(static_cast<size_t>(npts) * W, 0.0);
  rows.normal.assign(static_cast<size_t>(npts) * K, 0.0);

  for (int a = 0; a < W; ++a) {
    const std::vector<Real> dF = patch_d1(pt, Ftan, W * W, s, a);
    for (int p = 0; p < npts; ++p)
      for (int b = 0; b < W; ++b) {
        Real acc = dF[static_cast<size_t>(p) * W * W + a * W + b];
        for (int c = 0; c < W; ++c)
          acc += cd.Gam(p, a, a, c) * msc.ftan_at(p, c, b) +
                 cd.Gam(p, b, a, c) * msc.ftan_at(p, a, c);
        rows.tangential[static_cast<size_t>(p) * W + b] += acc;
      }
  }
  const bool have_fnor = max_abs(msc.F_nor) != 0.0;
  for (int p = 0; p < npts; ++p) {
    const Real* gi = fd.ginv(p);
    for (int b = 0; b < W; ++b) {
      Real acc = 0.0;
      if (have_fnor)
        for (int a = 0; a < W; ++a)
          for (int I = 0; I < K; ++I)
            for (int d = 0; d < W; ++d)
              acc += gi[b * W + d] * cd.K(p, I, a, d) * msc.fnor_at(p, a, I);
      rows.tangential[static_cast<size_t>(p) * W + b] += acc;
    }
  }

  if (have_fnor) {
    for (int a = 0; a < W; ++a) {
      const std::vector<Real> dF = patch_d1(pt, Fnor, W * K, s, a);
      for (int p = 0; p < npts; ++p)
        for (int I = 0; I < K; ++I) {
          Real acc = dF[(static_cast<size_t>(p) * W + a) * K + I];
          for (int c = 0; c < W; ++c)
            acc += cd.Gam(p, a, a, c) * msc.fnor_at(p, c, I);
          for (int J = 0; J < K; ++J) acc -= cd.om(p, a, I, J) * msc.fnor_at(p, a, J);
          rows.normal[static_cast<size_t>(p) * K + I] += acc;
        }
    }
  }
  for (int p = 0; p < npts; ++p)
    for (int I = 0; I < K; ++I) {
      Real acc = 0.0;
      for (int a = 0; a < W; ++a)
        for (int b = 0; b < W; ++b) acc += msc.ftan_at(p, a, b) * cd.K(p, I, a, b);
      rows.normal[static_cast<size_t>(p) * K + I] -= acc;
    }
  return rows;
}

// ---------------------------------------------------------------------------
// Chiral specializations of the equations of motion.
// ---------------------------------------------------------------------------

// Wave operator on the compact component: Gamma^{ab} (D_a D_b phi
// - Gamma^c_ab D_c phi), with first derivatives taken from the frame tangents
// (winding-aware, exact tau velocity) and the Hessian from the periodic
// residual (the winding ramp is linear, so its second derivatives vanish).
inline std::vector<Real> compact_wave_residual(const Patch& pt, const PatchFrames& pf,
                                               int s) {
  const FrameData& fd = pf.frames[s];
  const CurvatureData& cd = pf.curv_at(s);
  const int W = fd.world, T = fd.total, npts = pt.npts();
  std::vector<std::vector<Real>> phi(pt.depth);
  for (int k = 0; k < pt.depth; ++k) {
    phi[k].resize(npts);
    for (int p = 0; p < npts; ++p)
      phi[k][p] = pt.slices[k].xbar[static_cast<size_t>(p) * T + (T - 1)];
  }
  const std::vector<Real> hess = patch_hessian(pt, phi, 1, s);
  std::vector<Real> out(npts, 0.0);
  for (int p = 0; p < npts; ++p) {
    const Real* gi = fd.ginv(p);
    Real acc = 0.0;
    for (int a = 0; a < W; ++a)
      for (int b = 0; b < W; ++b) {
        Real term = hess[(static_cast<size_t>(p) * W + a) * W + b];
        for (int c = 0; c < W; ++c) term -= cd.Gam(p, c, a, b) * fd.phi_grad(p, c);
        acc += gi[a * W + b] * term;
      }
    out[p] = acc;
  }
  return out;
}

// Base-block residual of the chiral normal equation: contract the normal part
// of the acceleration with gamma^{ab} - g44 grad^a phi grad^b phi (the exact
// extended inverse when the chirality invariant vanishes) and report the base
// ambient components.  Layout (p, mu) with mu < base_dim.
inline std::vector<Real> chiral_base_residual(const Patch& pt, const PatchFrames& pf,
                                              int s) {
  const FrameData& fd = pf.frames[s];
  const CurvatureData& cd = pf.curv_at(s);
  const int W = fd.world, npts = pt.npts();
  const int base = pt.bg.base_dim;
  std::vector<Real> out(static_cast<size_t>(npts) * base, 0.0);
  for (int p = 0; p < npts; ++p) {
    const Real* gbi = fd.gbase_inv(p);
    // M^{ab} = gamma^{ab} - g44 phi^a phi^b with the base inverse raising.
    std::array<Real, kMaxWorld> phiup{};
    for (int a = 0; a < W; ++a) {
      Real acc = 0.0;
      for (int b = 0; b < W; ++b) acc += gbi[a * W + b] * fd.phi_grad(p, b);
      phiup[a] = acc;
    }
    for (int a = 0; a < W; ++a)
      for (int b = 0; b < W; ++b) {
        const Real m = gbi[a * W + b] - pt.bg.g44 * phiup[a] * phiup[b];
        for (int mu = 0; mu < base; ++mu) {
          // Normal part of the acceleration: D_a e_b minus its tangential
          // Christoffel projection.
          Real nacc = cd.de(p, a, b)[mu];
          for (int c = 0; c < W; ++c) nacc -= cd.Gam(p, c, a, b) * fd.e(p, c)[mu];
          out[static_cast<size_t>(p) * base + mu] += m * nacc;
        }
      }
  }
  return out;
}

}  // namespace chime
