#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "chime/embedding.hpp"

namespace chime {

// Optional per-point seed candidates for the normal frame, packed
// candidate-major (count * total_dim).
using SeedFn = std::function<std::vector<Real>(int point)>;

// ---------------------------------------------------------------------------
// Per-slice frame data: tangents, induced metrics (extended and base block),
// chirality invariant, and an orthonormal normal frame.  All normals are
// required to be spacelike, which holds for timelike worldvolumes in the
// block-diagonal ambient metric and for every Riemannian analysis surface.
// ---------------------------------------------------------------------------
struct FrameData {
  int world = 0;  // worldvolume dimension (tau included when timelike)
  int total = 0;  // ambient dimension
  int codim = 0;  // number of normals

  std::vector<Real> tangents;         // p, a, mu
  std::vector<Real> metric;           // p, a, b     extended Gamma_ab
  std::vector<Real> metric_inv;       // p, a, b     Gamma^ab
  std::vector<Real> metric_det;       // p
  std::vector<Real> volume;           // p           sqrt(-det) / sqrt(det)
  std::vector<Real> base_metric;      // p, a, b     gamma_ab
  std::vector<Real> base_metric_inv;  // p, a, b     gamma^ab
  std::vector<Real> base_det;         // p
  std::vector<Real> chirality;        // p           gamma^ab phi_a phi_b
  std::vector<Real> normals;          // p, I, mu

  const Real* e(int p, int a) const {
    return &tangents[(static_cast<size_t>(p) * world + a) * total];
  }
  Real* e(int p, int a) {
    return &tangents[(static_cast<size_t>(p) * world + a) * total];
  }
  const Real* g(int p) const { return &metric[static_cast<size_t>(p) * world * world]; }
  const Real* ginv(int p) const {
    return &metric_inv[static_cast<size_t>(p) * world * world];
  }
  const Real* gbase_inv(int p) const {
    return &base_metric_inv[static_cast<size_t>(p) * world * world];
  }
  const Real* nrm(int p, int I) const {
    return &normals[(static_cast<size_t>(p) * codim + I) * total];
  }
  Real* nrm(int p, int I) {
    return &normals[(static_cast<size_t>(p) * codim + I) * total];
  }
  // Compact (phi) component of the tangent: the phi gradient along a.
  Real phi_grad(int p, int a) const { return e(p, a)[total - 1]; }
};

namespace detail {

inline SmallMat pack_small(const Real* m, int w) {
  SmallMat s;
  s.n = w;
  for (int i = 0; i < w; ++i)
    for (int j = 0; j < w; ++j) s(i, j) = m[i * w + j];
  return s;
}

}  // namespace detail

// Tangents, metrics and chirality of one slice.  The extended metric is
// assembled in the rank-one form Gamma_ab = gamma_ab + g44 phi_a phi_b, which
// ties det(Gamma) = det(gamma) (1 + g44 * chirality) at roundoff level.
inline FrameData frame_slice_basic(const Patch& pt, int s) {
  const int W = pt.world_dim();
  const int T = pt.total_dim();
  const int npts = pt.npts();
  FrameData fd;
  fd.world = W;
  fd.total = T;
  fd.codim = T - W;
  require(fd.codim >= 1, "frames: worldvolume must have at least one normal");
  fd.tangents.assign(static_cast<size_t>(npts) * W * T, 0.0);
  fd.metric.assign(static_cast<size_t>(npts) * W * W, 0.0);
  fd.metric_inv.assign(static_cast<size_t>(npts) * W * W, 0.0);
  fd.metric_det.assign(npts, 0.0);
  fd.volume.assign(npts, 0.0);
  fd.base_metric.assign(static_cast<size_t>(npts) * W * W, 0.0);
  fd.base_metric_inv.assign(static_cast<size_t>(npts) * W * W, 0.0);
  fd.base_det.assign(npts, 0.0);
  fd.chirality.assign(npts, 0.0);

  const Slice& sl = pt.slices[s];
  // Spatial tangents from the periodic stencil, tau tangent from the stored
  // slice velocity.
  std::vector<std::vector<Real>> spat(pt.grid.dim);
  for (int d = 0; d < pt.grid.dim; ++d) {
    std::vector<Real> w(T, 0.0);
    for (int mu = 0; mu < T; ++mu) w[mu] = pt.winding_of(mu)[d];
    spat[d] = d1(pt.grid, d, sl.xbar, T, w.data());
  }
  const bool timelike = pt.mode == Mode::Timelike;
  for (int p = 0; p < npts; ++p) {
    for (int a = 0; a < W; ++a) {
      Real* ea = fd.e(p, a);
      if (timelike && a == 0) {
        for (int mu = 0; mu < T; ++mu) ea[mu] = sl.vbar[static_cast<size_t>(p) * T + mu];
      } else {
        const int d = timelike ? a - 1 : a;
        for (int mu = 0; mu < T; ++mu) ea[mu] = spat[d][static_cast<size_t>(p) * T + mu];
      }
    }
    Real* gam = &fd.base_metric[static_cast<size_t>(p) * W * W];
    Real* G = &fd.metric[static_cast<size_t>(p) * W * W];
    for (int a = 0; a < W; ++a)
      for (int b = 0; b < W; ++b) {
        const Real base = pt.bg.inner_base(fd.e(p, a), fd.e(p, b));
        gam[a * W + b] = base;
        G[a * W + b] = base + pt.bg.g44 * fd.phi_grad(p, a) * fd.phi_grad(p, b);
      }
    const SmallMat Gm = detail::pack_small(G, W);
    const Real dG = det(Gm);
    fd.metric_det[p] = dG;
    if (timelike) {
      require(dG < -kTolDegenerate, "frames: induced metric lost its timelike signature");
      fd.volume[p] = std::sqrt(-dG);
    } else {
      require(dG > kTolDegenerate, "frames: induced metric degenerate");
      fd.volume[p] = std::sqrt(dG);
    }
    const SmallMat Gi = inverse(Gm, dG);
    for (int a = 0; a < W; ++a)
      for (int b = 0; b < W; ++b) fd.metric_inv[static_cast<size_t>(p) * W * W + a * W + b] = Gi(a, b);

    const SmallMat gm = detail::pack_small(gam, W);
    const Real dg = det(gm);
    fd.base_det[p] = dg;
    require(std::abs(dg) > kTolDegenerate, "frames: base-block induced metric degenerate");
    const SmallMat gi = inverse(gm, dg);
    Real chi = 0;
    for (int a = 0; a < W; ++a)
      for (int b = 0; b < W; ++b) {
        fd.base_metric_inv[static_cast<size_t>(p) * W * W + a * W + b] = gi(a, b);
        chi += gi(a, b) * fd.phi_grad(p, a) * fd.phi_grad(p, b);
      }
    fd.chirality[p] = chi;
  }
  return fd;
}

namespace detail {

// Project out the tangent space (with the extended inverse metric) and the
// already accepted normals; ambient inner products throughout.
inline void project_out(const Background& bg, const FrameData& fd, int p,
                        const std::vector<std::vector<Real>>& accepted,
                        std::vector<Real>& r) {
  const int W = fd.world, T = fd.total;
  Real ip[kMaxWorld];
  for (int b = 0; b < W; ++b) ip[b] = bg.inner(fd.e(p, b), r.data());
  const Real* Gi = fd.ginv(p);
  for (int a = 0; a < W; ++a) {
    Real coef = 0;
    for (int b = 0; b < W; ++b) coef += Gi[a * W + b] * ip[b];
    const Real* ea = fd.e(p, a);
    for (int mu = 0; mu < T; ++mu) r[mu] -= coef * ea[mu];
  }
  for (const auto& n : accepted) {
    const Real c = bg.inner(n.data(), r.data());
    for (int mu = 0; mu < T; ++mu) r[mu] -= c * n[mu];
  }
}

}  // namespace detail

// Pointwise pivoted Gram-Schmidt normal frame with hysteresis.  Candidate
// list: the compact ansatz normal first (exactly tangent-orthogonal for any
// chirality), then optional scenario seeds, then the ambient coordinate
// axes.  Every candidate is normalized before the scan, so the pivot ranks
// conditioning -- the fraction of the candidate that survives projection --
// rather than raw magnitude; a low-amplitude curvature anchor that stays
// aligned with the normal space therefore beats a unit axis that is about to
// sweep through the tangent space.  Candidates below a small absolute norm
// are discarded outright (differencing roundoff on flat sheets, amplified by
// normalization, must never win).  The elimination order is pivoted at the
// first point and then frozen from point to point (and across slices when
// the caller threads `order_io` through), because changing the order at a
// near-tie leaves a derivative kink in the frame that finite differences
// amplify.  A level re-pivots only when its incumbent falls below a fixed
// fraction of the best available conditioning, i.e. when the geometry
// genuinely degrades that candidate.
inline void add_normals(const Patch& pt, FrameData& fd, const SeedFn& seeds,
                        std::vector<int>* order_io = nullptr) {
  const int W = fd.world, T = fd.total, K = fd.codim;
  const int npts = pt.npts();
  const Background& bg = pt.bg;
  fd.normals.assign(static_cast<size_t>(npts) * K * T, 0.0);
  std::vector<std::vector<Real>> cands;
  std::vector<std::vector<Real>> accepted;
  std::vector<int> local_order;
  std::vector<int>& order = order_io ? *order_io : local_order;
  std::vector<Real> norms;
  for (int p = 0; p < npts; ++p) {
    cands.clear();
    // Compact ansatz: base part e^mu_a gamma^ab phi_b, compact part -1/g44,
    // scaled by sqrt(g44); squared norm 1 + g44 * chirality.
    {
      std::vector<Real> n(T, 0.0);
      const Real* gi = fd.gbase_inv(p);
      const Real rg = std::sqrt(bg.g44);
      for (int a = 0; a < W; ++a) {
        Real coef = 0;
        for (int b = 0; b < W; ++b) coef += gi[a * W + b] * fd.phi_grad(p, b);
        const Real* ea = fd.e(p, a);
        for (int mu = 0; mu < bg.base_dim; ++mu) n[mu] += rg * coef * ea[mu];
      }
      n[T - 1] = -rg / bg.g44;
      cands.push_back(std::move(n));
    }
    if (seeds) {
      std::vector<Real> packed = seeds(p);
      require(packed.size() % T == 0, "frames: seed candidates have wrong stride");
      for (size_t off = 0; off + T <= packed.size(); off += T)
        cands.emplace_back(packed.begin() + off, packed.begin() + off + T);
    }
    for (int mu = 0; mu < T; ++mu) {
      std::vector<Real> axis(T, 0.0);
      axis[mu] = 1.0;
      cands.push_back(std::move(axis));
    }

    accepted.clear();
    std::vector<char> used(cands.size(), 0);
    for (size_t i = 0; i < cands.size(); ++i) {
      const Real n0 = std::sqrt(std::abs(bg.inner(cands[i].data(), cands[i].data())));
      if (n0 < kTolPivot) {
        used[i] = 1;  // too small to carry a direction: roundoff, not geometry
      } else {
        const Real inv = 1.0 / n0;
        for (Real& x : cands[i]) x *= inv;
      }
    }
    norms.assign(cands.size(), -1.0);
    for (int found = 0; found < K; ++found) {
      int best = -1;
      Real best_norm = 0;
      for (size_t i = 0; i < cands.size(); ++i) {
        if (used[i]) continue;
        std::vector<Real> r = cands[i];
        detail::project_out(bg, fd, p, accepted, r);
        const Real norm = std::abs(bg.inner(r.data(), r.data()));
        norms[i] = norm;
        if (norm > best_norm * (1.0 + 1e-6)) {
          best = static_cast<int>(i);
          best_norm = norm;
        }
      }
      require(best >= 0 && best_norm > kTolPivot,
              "frames: could not complete the normal frame");
      int pick = best;
      if (static_cast<int>(order.size()) > found) {
        const int inc = order[found];
        if (inc >= 0 && inc < static_cast<int>(cands.size()) && !used[inc] &&
            norms[inc] > kTolPivot && norms[inc] >= 0.25 * best_norm)
          pick = inc;
        order[found] = pick;
      } else {
        order.push_back(pick);
      }
      used[pick] = 1;
      std::vector<Real> r = cands[pick];
      detail::project_out(bg, fd, p, accepted, r);
      detail::project_out(bg, fd, p, accepted, r);  // second pass for accuracy
      const Real n2 = bg.inner(r.data(), r.data());
      require(n2 > kTolPivot, "frames: normal space must be spacelike");
      const Real inv = 1.0 / std::sqrt(n2);
      for (Real& x : r) x *= inv;
      accepted.push_back(std::move(r));
    }
    for (int I = 0; I < K; ++I) {
      Real* n = fd.nrm(p, I);
      for (int mu = 0; mu < T; ++mu) n[mu] = accepted[I][mu];
    }
  }
}

// Gram-Schmidt with a fixed candidate order and no pivoting: candidates(p)
// must supply exactly codim ambient vectors that remain independent after
// tangent projection.  Used when the frame must stay close to a prescribed
// one, e.g. carrying the undeformed normals onto a deformed worldvolume.
inline void add_normals_fixed(const Patch& pt, FrameData& fd, const SeedFn& candidates) {
  const int T = fd.total, K = fd.codim;
  const int npts = pt.npts();
  fd.normals.assign(static_cast<size_t>(npts) * K * T, 0.0);
  std::vector<std::vector<Real>> accepted;
  for (int p = 0; p < npts; ++p) {
    const std::vector<Real> packed = candidates(p);
    require(static_cast<int>(packed.size()) == K * T,
            "frames: fixed-order candidates must match the codimension");
    accepted.clear();
    for (int I = 0; I < K; ++I) {
      std::vector<Real> r(packed.begin() + static_cast<size_t>(I) * T,
                          packed.begin() + static_cast<size_t>(I + 1) * T);
      detail::project_out(pt.bg, fd, p, accepted, r);
      detail::project_out(pt.bg, fd, p, accepted, r);
      const Real n2 = pt.bg.inner(r.data(), r.data());
      require(n2 > kTolPivot, "frames: fixed-order candidate degenerated");
      const Real inv = 1.0 / std::sqrt(n2);
      for (Real& x : r) x *= inv;
      accepted.push_back(std::move(r));
    }
    for (int I = 0; I < K; ++I)
      for (int mu = 0; mu < T; ++mu) fd.nrm(p, I)[mu] = accepted[I][mu];
  }
}

namespace detail {

// Reorder and flip the normals at one point so that they overlap a reference
// frame as directly as possible: greedy assignment on |<ref_I, cur_J>| with
// the sign taken from the inner product.  Permutation and sign changes only,
// so orthonormality is untouched.
inline void align_point(const Background& bg, int codim, int T, const Real* ref,
                        Real* cur) {
  std::vector<Real> out(static_cast<size_t>(codim) * T, 0.0);
  std::vector<char> taken(codim, 0);
  for (int I = 0; I < codim; ++I) {
    int best = -1;
    Real best_abs = -1.0;
    Real best_val = 0.0;
    for (int J = 0; J < codim; ++J) {
      if (taken[J]) continue;
      const Real v = bg.inner(ref + static_cast<size_t>(I) * T, cur + static_cast<size_t>(J) * T);
      if (std::abs(v) > best_abs) {
        best_abs = std::abs(v);
        best_val = v;
        best = J;
      }
    }
    taken[best] = 1;
    const Real sign = best_val < 0 ? -1.0 : 1.0;
    for (int mu = 0; mu < T; ++mu)
      out[static_cast<size_t>(I) * T + mu] = sign * cur[static_cast<size_t>(best) * T + mu];
  }
  for (size_t i = 0; i < out.size(); ++i) cur[i] = out[i];
}

// Reference point for the lexicographic sweep: one step back along the first
// grid direction with a nonzero index.  Guarantees the reference has a
// smaller flat index, so a single forward sweep aligns the whole slice.
inline int sweep_reference(const Grid& g, int p) {
  auto idx = g.unflat(p);
  for (int d = 0; d < g.dim; ++d) {
    if (idx[d] > 0) {
      idx[d] -= 1;
      return g.flat(idx);
    }
  }
  return -1;
}

}  // namespace detail

// Continuity alignment: the first slice is swept in flat order anchored at
// point 0; each later slice is aligned pointwise to the previous slice.
// Without this pass the pointwise pivoting is discontinuous on closed loops
// (the pivot winner changes along the surface), which would wreck every
// finite difference of the normal field.
inline void align_frames(const Patch& pt, std::vector<FrameData>& frames) {
  const int K = frames[0].codim, T = frames[0].total;
  if (K == 0) return;
  const int npts = pt.npts();
  for (int p = 1; p < npts; ++p) {
    const int ref = detail::sweep_reference(pt.grid, p);
    detail::align_point(pt.bg, K, T, frames[0].nrm(ref, 0), frames[0].nrm(p, 0));
  }
  for (size_t s = 1; s < frames.size(); ++s)
    for (int p = 0; p < npts; ++p)
      detail::align_point(pt.bg, K, T, frames[s - 1].nrm(p, 0), frames[s].nrm(p, 0));
}

namespace detail {

// Eigen-decomposition of a symmetric k x k matrix by cyclic Jacobi rotations.
// A is row-major and reduced in place to its eigenvalues on the diagonal; the
// columns of V come out as the orthonormal eigenvectors.
inline void jacobi_eigen_sym(std::vector<Real>& A, std::vector<Real>& V, int k) {
  V.assign(static_cast<size_t>(k) * k, 0.0);
  for (int i = 0; i < k; ++i) V[static_cast<size_t>(i) * k + i] = 1.0;
  auto at = [&](std::vector<Real>& m, int i, int j) -> Real& {
    return m[static_cast<size_t>(i) * k + j];
  };
  for (int sweep = 0; sweep < 64; ++sweep) {
    Real off = 0.0;
    for (int p = 0; p < k; ++p)
      for (int q = p + 1; q < k; ++q) off = std::max(off, std::abs(at(A, p, q)));
    if (off < 1e-14) break;
    for (int p = 0; p < k; ++p)
      for (int q = p + 1; q < k; ++q) {
        const Real apq = at(A, p, q);
        if (std::abs(apq) < 1e-300) continue;
        const Real theta = (at(A, q, q) - at(A, p, p)) / (2.0 * apq);
        const Real t = (theta >= 0 ? 1.0 : -1.0) /
                       (std::abs(theta) + std::sqrt(1.0 + theta * theta));
        const Real c = 1.0 / std::sqrt(1.0 + t * t), s = t * c;
        for (int i = 0; i < k; ++i) {
          const Real aip = at(A, i, p), aiq = at(A, i, q);
          at(A, i, p) = c * aip - s * aiq;
          at(A, i, q) = s * aip + c * aiq;
        }
        for (int i = 0; i < k; ++i) {
          const Real api = at(A, p, i), aqi = at(A, q, i);
          at(A, p, i) = c * api - s * aqi;
          at(A, q, i) = s * api + c * aqi;
        }
        for (int i = 0; i < k; ++i) {
          const Real vip = at(V, i, p), viq = at(V, i, q);
          at(V, i, p) = c * vip - s * viq;
          at(V, i, q) = s * vip + c * viq;
        }
      }
  }
}

}  // namespace detail

// Largest neighbour-to-neighbour frame jump of one slice: the deviation of
// <n_I(p), n_I(p+1)> from one, maximized over the closed first grid direction
// (seam step included).  Smooth frames keep this at O(h); an O(1) value means
// the pivot handed over between candidates somewhere around the loop.
inline Real frame_step_defect(const Patch& pt, const FrameData& fd) {
  if (pt.grid.dim != 1) return 0.0;
  const int n = pt.npts(), K = fd.codim, T = fd.total;
  Real worst = 0.0;
  for (int p = 0; p < n; ++p) {
    const int q = (p + 1) % n;
    for (int I = 0; I < K; ++I) {
      Real ov = 0.0;
      for (int mu = 0; mu < T; ++mu)
        ov += pt.bg.metric_diag(mu) * fd.nrm(p, I)[mu] * fd.nrm(q, I)[mu];
      worst = std::max(worst, std::abs(ov - 1.0));
    }
  }
  return worst;
}

// Replace the pointwise-pivoted normals of a closed string slice by a frame
// that is smooth around the loop.  Pointwise pivoting picks well-conditioned
// normals but cannot guarantee smoothness when the normal bundle winds with
// the surface: somewhere along the loop the pivot must hand over between
// candidates, and the handover is a kink that finite differences amplify.
// Two passes fix this.  First the point-0 frame (kept from the pivot) is
// carried around the loop by discrete parallel transport: project the
// previous point's normals onto the current normal space and re-orthonormalize.
// That concentrates all the winding into a single orthogonal holonomy matrix
// M at the seam.  Second, the holonomy is spread evenly around the loop: M is
// split into invariant rotation planes (via the symmetric part M + M^T, whose
// eigenspaces group the planes by rotation angle), and every point p is
// rotated by the fraction t = p/n of each plane angle towards M^{-1}, so the
// frame returns to itself across the seam up to the transport's O(h^2) local
// error.  Half-turn planes are handled like any other angle; an orientable
// normal bundle over a closed loop always has det M = +1, so flipped
// directions pair up.  If the reconstructed path fails to reproduce the
// holonomy (pathological clustering of nearly-equal angles), the distribution
// pass is skipped and the seam defect is left for the diagnostics to report.
inline void smooth_loop_frames(const Patch& pt, FrameData& fd) {
  if (pt.grid.dim != 1) return;
  const int n = pt.npts(), K = fd.codim, T = fd.total;
  if (K == 0 || n < 8) return;
  const Background& bg = pt.bg;

  std::vector<std::vector<Real>> accepted;
  auto transport_to = [&](int src, int dst) {
    accepted.clear();
    for (int I = 0; I < K; ++I) {
      std::vector<Real> r(fd.nrm(src, I), fd.nrm(src, I) + T);
      detail::project_out(bg, fd, dst, accepted, r);
      detail::project_out(bg, fd, dst, accepted, r);
      const Real n2 = bg.inner(r.data(), r.data());
      require(n2 > kTolPivot, "frames: transported normal frame degenerated");
      const Real inv = 1.0 / std::sqrt(n2);
      for (Real& x : r) x *= inv;
      accepted.push_back(std::move(r));
    }
  };

  for (int p = 1; p < n; ++p) {
    transport_to(p - 1, p);
    for (int I = 0; I < K; ++I)
      std::copy(accepted[I].begin(), accepted[I].end(), fd.nrm(p, I));
  }

  // Seam holonomy in the point-0 normal basis: t_I = sum_J M_IJ n_J(0).
  transport_to(n - 1, 0);
  std::vector<Real> M(static_cast<size_t>(K) * K);
  for (int I = 0; I < K; ++I)
    for (int J = 0; J < K; ++J)
      M[static_cast<size_t>(I) * K + J] = bg.inner(accepted[I].data(), fd.nrm(0, J));

  // Invariant planes of M.  Eigenvectors of the symmetric part with
  // eigenvalue 2 cos(theta) span the planes of angle theta; peel them off one
  // by one, deflating the remaining pool so angle clusters are consumed
  // cleanly.  Vectors with Mv = v are fixed and need no rotation; Mv = -v
  // vectors pair into half-turn planes.
  struct Plane {
    std::vector<Real> v, w;
    Real theta;
  };
  std::vector<Plane> planes;
  std::vector<std::vector<Real>> flipped;
  {
    std::vector<Real> B(static_cast<size_t>(K) * K), V;
    for (int I = 0; I < K; ++I)
      for (int J = 0; J < K; ++J)
        B[static_cast<size_t>(I) * K + J] = 0.5 * (M[static_cast<size_t>(I) * K + J] +
                                                   M[static_cast<size_t>(J) * K + I]);
    detail::jacobi_eigen_sym(B, V, K);
    std::vector<std::vector<Real>> pool(K, std::vector<Real>(K));
    for (int j = 0; j < K; ++j)
      for (int i = 0; i < K; ++i) pool[j][i] = V[static_cast<size_t>(i) * K + j];

    auto deflate = [&](std::vector<Real>& x) {
      auto drop = [&x, K](const std::vector<Real>& d) {
        Real ov = 0;
        for (int i = 0; i < K; ++i) ov += x[i] * d[i];
        for (int i = 0; i < K; ++i) x[i] -= ov * d[i];
      };
      for (const Plane& pl : planes) {
        drop(pl.v);
        drop(pl.w);
      }
      for (const auto& f : flipped) drop(f);
      Real n2 = 0;
      for (int i = 0; i < K; ++i) n2 += x[i] * x[i];
      if (n2 < 0.25) return false;  // consumed by earlier planes
      const Real inv = 1.0 / std::sqrt(n2);
      for (Real& xi : x) xi *= inv;
      return true;
    };

    for (auto& cand : pool) {
      std::vector<Real> v = cand;
      if (!deflate(v)) continue;
      std::vector<Real> mv(K, 0.0);
      for (int i = 0; i < K; ++i)
        for (int j = 0; j < K; ++j) mv[i] += M[static_cast<size_t>(i) * K + j] * v[j];
      Real c = 0;
      for (int i = 0; i < K; ++i) c += v[i] * mv[i];
      std::vector<Real> r(K);
      Real s2 = 0;
      for (int i = 0; i < K; ++i) {
        r[i] = mv[i] - c * v[i];
        s2 += r[i] * r[i];
      }
      const Real s = std::sqrt(s2);
      if (s > 1e-7) {
        for (Real& ri : r) ri /= s;
        planes.push_back({std::move(v), std::move(r), std::atan2(s, c)});
      } else if (c < 0.0) {
        flipped.push_back(std::move(v));
      }  // c > 0: fixed direction, no rotation needed
    }
    for (size_t i = 0; i + 1 < flipped.size(); i += 2)
      planes.push_back({flipped[i], flipped[i + 1], kPi});
    if (flipped.size() % 2 != 0) return;  // det M = -1: leave the seam measured
  }

  // Verify the plane path reproduces the holonomy before touching the frame:
  // R(1) must equal M^T (the path runs from the identity to M^{-1}).
  auto rot_at = [&](Real t, std::vector<Real>& R) {
    R.assign(static_cast<size_t>(K) * K, 0.0);
    for (int i = 0; i < K; ++i) R[static_cast<size_t>(i) * K + i] = 1.0;
    for (const Plane& pl : planes) {
      const Real cc = std::cos(t * pl.theta) - 1.0, ss = std::sin(t * pl.theta);
      for (int i = 0; i < K; ++i)
        for (int j = 0; j < K; ++j)
          R[static_cast<size_t>(i) * K + j] +=
              cc * (pl.v[i] * pl.v[j] + pl.w[i] * pl.w[j]) -
              ss * (pl.w[i] * pl.v[j] - pl.v[i] * pl.w[j]);
    }
  };
  std::vector<Real> R;
  rot_at(1.0, R);
  Real close = 0.0;
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j)
      close = std::max(close, std::abs(R[static_cast<size_t>(i) * K + j] -
                                       M[static_cast<size_t>(j) * K + i]));
  if (close > 1e-8) return;

  std::vector<Real> rotated(static_cast<size_t>(K) * T);
  for (int p = 1; p < n; ++p) {
    rot_at(static_cast<Real>(p) / n, R);
    std::fill(rotated.begin(), rotated.end(), 0.0);
    for (int I = 0; I < K; ++I) {
      Real* out = &rotated[static_cast<size_t>(I) * T];
      for (int J = 0; J < K; ++J) {
        const Real w = R[static_cast<size_t>(I) * K + J];
        const Real* nj = fd.nrm(p, J);
        for (int mu = 0; mu < T; ++mu) out[mu] += w * nj[mu];
      }
    }
    for (int I = 0; I < K; ++I)
      std::copy(rotated.begin() + static_cast<size_t>(I) * T,
                rotated.begin() + static_cast<size_t>(I) * T + T, fd.nrm(p, I));
  }
}

// Curvature-adapted pivot candidates for one slice: second derivatives of the
// embedding.  These vectors rotate with the surface, so on loops whose normal
// complement winds around the ambient space (rotating doubled strings) they
// stay non-degenerate where every fixed ambient axis must vanish twice per
// circuit.  For doubled strings the sum and difference of the sigma-sigma and
// sigma-tau derivatives isolate the two branch accelerations, which keep a
// constant norm along the loop; the plain sigma-sigma derivative covers
// analysis surfaces with no velocity data.  A field is only offered when its
// pointwise norm is uniformly fat across the slice: an anchor that dies
// somewhere would force a re-pivot kink there, which is exactly the failure
// mode this is meant to remove.  Oscillating sheet curvature and flat sheets
// are filtered out by that test, leaving the pivot's behaviour on those
// scenarios untouched.
inline SeedFn with_curvature_seeds(const Patch& pt, int s, const SeedFn& user) {
  const int T = pt.total_dim();
  const Grid& g = pt.grid;
  const Slice& sl = pt.slices[s];
  const int npts = pt.npts();
  std::vector<std::vector<Real>> fields;  // each npts * T
  auto offer = [&](std::vector<Real>&& f) {
    Real lo = std::numeric_limits<Real>::max(), hi = 0.0;
    for (int p = 0; p < npts; ++p) {
      Real n2 = 0;
      for (int mu = 0; mu < T; ++mu) {
        const Real x = f[static_cast<size_t>(p) * T + mu];
        n2 += x * x;
      }
      lo = std::min(lo, n2);
      hi = std::max(hi, n2);
    }
    if (hi > 1e-12 && lo >= 0.09 * hi) fields.push_back(std::move(f));  // min/max norm >= 0.3
  };
  for (int d = 0; d < g.dim; ++d) {
    std::vector<Real> w(T, 0.0);
    for (int mu = 0; mu < T; ++mu) w[mu] = pt.winding_of(mu)[d];
    std::vector<Real> xss = d2(g, d, sl.xbar, T, w.data());
    if (pt.mode == Mode::Timelike) {
      const std::vector<Real> xst = d1(g, d, sl.vbar, T, nullptr);
      std::vector<Real> u(xss.size()), v(xss.size());
      for (size_t i = 0; i < xss.size(); ++i) {
        u[i] = xss[i] + xst[i];
        v[i] = xss[i] - xst[i];
      }
      offer(std::move(u));
      offer(std::move(v));
    }
    offer(std::move(xss));
  }
  if (fields.empty()) return user;
  return [fields = std::move(fields), user, T](int p) {
    std::vector<Real> packed;
    if (user) packed = user(p);
    const size_t off = static_cast<size_t>(p) * T;
    for (const auto& f : fields) packed.insert(packed.end(), f.begin() + off, f.begin() + off + T);
    return packed;
  };
}

// Full frame pipeline for every slice of a patch.  The pivoted frame is kept
// whenever it is already smooth around the loop; the transport-and-distribute
// pass only takes over when some slice shows an O(1) neighbour jump, i.e.
// when the normal bundle winds and pointwise pivoting cannot close.  The
// decision is made once for the whole patch so every slice gets the same
// construction and the frame stays smooth in tau.
inline std::vector<FrameData> build_frames(const Patch& pt, const SeedFn& seeds = {}) {
  std::vector<FrameData> frames;
  frames.reserve(pt.depth);
  std::vector<int> order;  // shared pivot order keeps frames smooth in tau
  for (int s = 0; s < pt.depth; ++s) {
    frames.push_back(frame_slice_basic(pt, s));
    add_normals(pt, frames.back(), with_curvature_seeds(pt, s, seeds), &order);
  }
  Real jump = 0.0;
  for (int s = 0; s < pt.depth; ++s) jump = std::max(jump, frame_step_defect(pt, frames[s]));
  if (jump > 0.25)
    for (int s = 0; s < pt.depth; ++s) smooth_loop_frames(pt, frames[s]);
  align_frames(pt, frames);
  return frames;
}

// Largest deviation from orthonormality: |<n_I, n_J> - delta_IJ| and
// |<n_I, e_a>| over all points of a slice.
inline Real frame_orthonormality_residual(const Patch& pt, const FrameData& fd) {
  Real worst = 0;
  for (int p = 0; p < pt.npts(); ++p) {
    for (int I = 0; I < fd.codim; ++I) {
      for (int J = 0; J < fd.codim; ++J) {
        const Real v = pt.bg.inner(fd.nrm(p, I), fd.nrm(p, J));
        worst = std::max(worst, std::abs(v - (I == J ? 1.0 : 0.0)));
      }
      for (int a = 0; a < fd.world; ++a)
        worst = std::max(worst, std::abs(pt.bg.inner(fd.nrm(p, I), fd.e(p, a))));
    }
  }
  return worst;
}

// Completeness of tangents plus normals as a resolution of the inverse
// ambient metric: Gamma^ab e_a^mu e_b^nu + sum_I n_I^mu n_I^nu = g^{mu nu}.
inline Real completeness_residual(const Patch& pt, const FrameData& fd) {
  const int W = fd.world, T = fd.total;
  Real worst = 0;
  for (int p = 0; p < pt.npts(); ++p) {
    const Real* Gi = fd.ginv(p);
    for (int mu = 0; mu < T; ++mu)
      for (int nu = 0; nu < T; ++nu) {
        Real s = 0;
        for (int a = 0; a < W; ++a)
          for (int b = 0; b < W; ++b) s += Gi[a * W + b] * fd.e(p, a)[mu] * fd.e(p, b)[nu];
        for (int I = 0; I < fd.codim; ++I) s += fd.nrm(p, I)[mu] * fd.nrm(p, I)[nu];
        const Real want = mu == nu ? 1.0 / pt.bg.metric_diag(mu) : 0.0;
        worst = std::max(worst, std::abs(s - want));
      }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Slice-level derivatives and second-fundamental-form data.  Valid on slices
// with both tau neighbours present (any slice in Riemannian mode).
// ---------------------------------------------------------------------------
struct CurvatureData {
  int world = 0, total = 0, codim = 0;
  std::vector<Real> dtangents;    // p, a, b, mu      D_a e_b
  std::vector<Real> dnormals;     // p, a, I, mu      D_a n_I
  std::vector<Real> extrinsic;    // p, I, a, b       K^I_ab (symmetrized)
  std::vector<Real> twist;        // p, a, I, J       omega_a^{IJ} (antisym)
  std::vector<Real> dmetric;      // p, c, a, b       D_c Gamma_ab
  std::vector<Real> christoffel;  // p, c, a, b       Gamma^c_ab

  const Real* de(int p, int a, int b) const {
    return &dtangents[((static_cast<size_t>(p) * world + a) * world + b) * total];
  }
  const Real* dn(int p, int a, int I) const {
    return &dnormals[((static_cast<size_t>(p) * world + a) * codim + I) * total];
  }
  Real K(int p, int I, int a, int b) const {
    return extrinsic[((static_cast<size_t>(p) * codim + I) * world + a) * world + b];
  }
  Real om(int p, int a, int I, int J) const {
    return twist[((static_cast<size_t>(p) * world + a) * codim + I) * codim + J];
  }
  Real dG(int p, int c, int a, int b) const {
    return dmetric[((static_cast<size_t>(p) * world + c) * world + a) * world + b];
  }
  Real Gam(int p, int c, int a, int b) const {
    return christoffel[((static_cast<size_t>(p) * world + c) * world + a) * world + b];
  }
};

// Derivative of one FrameData member along worldvolume direction a.
inline std::vector<Real> slice_deriv(const Patch& pt,
                                     const std::vector<FrameData>& frames, int s,
                                     int a, std::vector<Real> FrameData::*member,
                                     int ncomp) {
  if (pt.mode == Mode::Timelike && a == 0) {
    require(s > 0 && s + 1 < static_cast<int>(frames.size()),
            "slice_deriv: tau derivative needs both neighbour slices");
    const std::vector<Real>& fp = frames[s + 1].*member;
    const std::vector<Real>& fm = frames[s - 1].*member;
    std::vector<Real> out(fp.size());
    const Real inv2dt = 1.0 / (2.0 * pt.dtau);
    for (size_t i = 0; i < out.size(); ++i) out[i] = (fp[i] - fm[i]) * inv2dt;
    return out;
  }
  const int dir = pt.mode == Mode::Timelike ? a - 1 : a;
  return d1(pt.grid, dir, frames[s].*member, ncomp);
}

inline CurvatureData build_curvature(const Patch& pt,
                                     const std::vector<FrameData>& frames, int s) {
  const FrameData& fd = frames[s];
  const int W = fd.world, T = fd.total, K = fd.codim;
  const int npts = pt.npts();
  CurvatureData cd;
  cd.world = W;
  cd.total = T;
  cd.codim = K;
  cd.dtangents.assign(static_cast<size_t>(npts) * W * W * T, 0.0);
  cd.dnormals.assign(static_cast<size_t>(npts) * W * K * T, 0.0);
  cd.extrinsic.assign(static_cast<size_t>(npts) * K * W * W, 0.0);
  cd.twist.assign(static_cast<size_t>(npts) * W * K * K, 0.0);
  cd.dmetric.assign(static_cast<size_t>(npts) * W * W * W, 0.0);
  cd.christoffel.assign(static_cast<size_t>(npts) * W * W * W, 0.0);

  for (int a = 0; a < W; ++a) {
    const std::vector<Real> det_ = slice_deriv(pt, frames, s, a, &FrameData::tangents, W * T);
    const std::vector<Real> dnm = slice_deriv(pt, frames, s, a, &FrameData::normals, K * T);
    const std::vector<Real> dmet = slice_deriv(pt, frames, s, a, &FrameData::metric, W * W);
    for (int p = 0; p < npts; ++p) {
      for (int b = 0; b < W; ++b)
        for (int mu = 0; mu < T; ++mu)
          cd.dtangents[((static_cast<size_t>(p) * W + a) * W + b) * T + mu] =
              det_[(static_cast<size_t>(p) * W + b) * T + mu];
      for (int I = 0; I < K; ++I)
        for (int mu = 0; mu < T; ++mu)
          cd.dnormals[((static_cast<size_t>(p) * W + a) * K + I) * T + mu] =
              dnm[(static_cast<size_t>(p) * K + I) * T + mu];
      for (int b = 0; b < W; ++b)
        for (int c = 0; c < W; ++c)
          cd.dmetric[((static_cast<size_t>(p) * W + a) * W + b) * W + c] =
              dmet[(static_cast<size_t>(p) * W + b) * W + c];
    }
  }

  for (int p = 0; p < npts; ++p) {
    // Extrinsic curvature K^I_ab = -(D_a e_b) . n_I, symmetrized over (a, b).
    for (int I = 0; I < K; ++I)
      for (int a = 0; a < W; ++a)
        for (int b = 0; b <= a; ++b) {
          const Real kab = -pt.bg.inner(cd.de(p, a, b), fd.nrm(p, I));
          const Real kba = -pt.bg.inner(cd.de(p, b, a), fd.nrm(p, I));
          const Real sym = 0.5 * (kab + kba);
          cd.extrinsic[((static_cast<size_t>(p) * K + I) * W + a) * W + b] = sym;
          cd.extrinsic[((static_cast<size_t>(p) * K + I) * W + b) * W + a] = sym;
        }
    // Twist omega_a^{IJ} = (D_a n_I) . n_J, antisymmetrized over (I, J).
    for (int a = 0; a < W; ++a)
      for (int I = 0; I < K; ++I)
        for (int J = 0; J < I; ++J) {
          const Real wij = pt.bg.inner(cd.dn(p, a, I), fd.nrm(p, J));
          const Real wji = pt.bg.inner(cd.dn(p, a, J), fd.nrm(p, I));
          const Real anti = 0.5 * (wij - wji);
          cd.twist[((static_cast<size_t>(p) * W + a) * K + I) * K + J] = anti;
          cd.twist[((static_cast<size_t>(p) * W + a) * K + J) * K + I] = -anti;
        }
    // Christoffel symbols of the extended induced metric.
    const Real* Gi = fd.ginv(p);
    for (int c = 0; c < W; ++c)
      for (int a = 0; a < W; ++a)
        for (int b = 0; b < W; ++b) {
          Real s2 = 0;
          for (int d = 0; d < W; ++d)
            s2 += Gi[c * W + d] *
                  (cd.dG(p, a, d, b) + cd.dG(p, b, d, a) - cd.dG(p, d, a, b));
          cd.christoffel[((static_cast<size_t>(p) * W + c) * W + a) * W + b] = 0.5 * s2;
        }
  }
  return cd;
}

// Max residuals of the two frame-evolution identities
//   D_a e_b = Gamma^c_ab e_c - K^I_ab n_I
//   D_a n_I = K_a^{b I} e_b + omega_a^{IJ} n_J
// over a slice.  They quantify how well the discrete frame derivatives close
// onto the computed connection coefficients.
inline std::pair<Real, Real> frame_evolution_residual(const Patch& pt,
                                                      const FrameData& fd,
                                                      const CurvatureData& cd) {
  const int W = fd.world, T = fd.total, K = fd.codim;
  Real worst_e = 0, worst_n = 0;
  for (int p = 0; p < pt.npts(); ++p) {
    const Real* Gi = fd.ginv(p);
    for (int a = 0; a < W; ++a) {
      for (int b = 0; b < W; ++b)
        for (int mu = 0; mu < T; ++mu) {
          Real r = cd.de(p, a, b)[mu];
          for (int c = 0; c < W; ++c) r -= cd.Gam(p, c, a, b) * fd.e(p, c)[mu];
          for (int I = 0; I < K; ++I) r += cd.K(p, I, a, b) * fd.nrm(p, I)[mu];
          worst_e = std::max(worst_e, std::abs(r));
        }
      for (int I = 0; I < K; ++I)
        for (int mu = 0; mu < T; ++mu) {
          Real r = cd.dn(p, a, I)[mu];
          for (int b = 0; b < W; ++b) {
            Real kup = 0;
            for (int c = 0; c < W; ++c) kup += Gi[b * W + c] * cd.K(p, I, a, c);
            r -= kup * fd.e(p, b)[mu];
          }
          for (int J = 0; J < K; ++J) r -= cd.om(p, a, I, J) * fd.nrm(p, J)[mu];
          worst_n = std::max(worst_n, std::abs(r));
        }
    }
  }
  return {worst_e, worst_n};
}

}  // namespace chime
