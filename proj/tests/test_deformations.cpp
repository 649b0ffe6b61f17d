#include <catch2/catch_amalgamated.hpp>

#include "chime/deformations.hpp"
#include "chime/scenarios.hpp"

using namespace chime;

namespace {

Real max_abs_diff(const std::vector<Real>& a, const std::vector<Real>& b) {
  REQUIRE(a.size() == b.size());
  Real m = 0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Random ambient deformation, affine in tau so the velocity shift is exact.
void make_affine_ambient(const Patch& pt, std::uint64_t seed, Real amp,
                         std::vector<std::vector<Real>>& deltaX,
                         std::vector<std::vector<Real>>& deltaV) {
  SplitMix64 rng(seed);
  const int T = pt.total_dim();
  const int dim = pt.grid.dim;
  std::vector<RandomField> base, rate;
  for (int mu = 0; mu < T; ++mu) {
    base.push_back(make_random_field(rng, dim, 3, amp));
    rate.push_back(make_random_field(rng, dim, 3, amp));
  }
  const int npts = pt.npts();
  deltaX.assign(pt.depth, {});
  deltaV.assign(pt.depth, {});
  for (int s = 0; s < pt.depth; ++s) {
    const Real dt = (s - pt.centre()) * pt.dtau;
    deltaX[s].resize(static_cast<size_t>(npts) * T);
    deltaV[s].resize(static_cast<size_t>(npts) * T);
    for (int p = 0; p < npts; ++p) {
      const auto idx = pt.grid.unflat(p);
      Real xi[kMaxWorld];
      for (int d = 0; d < dim; ++d) xi[d] = pt.grid.coord(d, idx[d]);
      for (int mu = 0; mu < T; ++mu) {
        deltaX[s][static_cast<size_t>(p) * T + mu] =
            base[mu].eval(xi) + dt * rate[mu].eval(xi);
        deltaV[s][static_cast<size_t>(p) * T + mu] = rate[mu].eval(xi);
      }
    }
  }
}

// Random normal deformation components, affine in tau.
std::vector<std::vector<Real>> make_affine_normal(const Patch& pt, int codim,
                                                  std::uint64_t seed, Real amp) {
  SplitMix64 rng(seed);
  const int dim = pt.grid.dim;
  std::vector<RandomField> base, rate;
  for (int I = 0; I < codim; ++I) {
    base.push_back(make_random_field(rng, dim, 3, amp));
    rate.push_back(make_random_field(rng, dim, 3, amp));
  }
  const int npts = pt.npts();
  std::vector<std::vector<Real>> phi(pt.depth);
  for (int s = 0; s < pt.depth; ++s) {
    const Real dt = (s - pt.centre()) * pt.dtau;
    phi[s].resize(static_cast<size_t>(npts) * codim);
    for (int p = 0; p < npts; ++p) {
      const auto idx = pt.grid.unflat(p);
      Real xi[kMaxWorld];
      for (int d = 0; d < dim; ++d) xi[d] = pt.grid.coord(d, idx[d]);
      for (int I = 0; I < codim; ++I)
        phi[s][static_cast<size_t>(p) * codim + I] =
            base[I].eval(xi) + dt * rate[I].eval(xi);
    }
  }
  return phi;
}

struct Mismatches {
  Real metric, metric_inv, volume, extrinsic;
};

// Formula-vs-oracle mismatches for one resolution of the random string.
Mismatches deformation_mismatches(int n, std::uint64_t scenario_seed) {
  const Scenario sc = make_random_smooth(scenario_seed, 1, 4, 1.3);
  const Grid grid{n};
  const Real h = grid.spacing(0);
  const Patch pt = make_patch(sc, grid, 5, 0.5 * h, 0.37);
  const PatchFrames pf = build_patch_frames(pt);
  const int s = pt.centre();
  const Real eps = 1e-5;

  std::vector<std::vector<Real>> dX, dV;
  make_affine_ambient(pt, 7, 0.05, dX, dV);
  const MetricDeformation md = metric_deformation(pt, pf, dX, s);
  const DeformationOracle oc = deformation_oracle(pt, pf, dX, dV, eps);

  const int codim = pf.frames[s].codim;
  const std::vector<std::vector<Real>> phi = make_affine_normal(pt, codim, 11, 0.05);
  std::vector<std::vector<Real>> nX, nV;
  normal_deformation_fields(pt, pf, phi, nX, nV);
  const std::vector<Real> dk = extrinsic_deformation(pt, pf, phi, s);
  const DeformationOracle ocn = deformation_oracle(pt, pf, nX, nV, eps);

  Mismatches mm;
  mm.metric = max_abs_diff(md.d_metric, oc.d_metric);
  mm.metric_inv = max_abs_diff(md.d_metric_inv, oc.d_metric_inv);
  mm.volume = max_abs_diff(md.d_volume, oc.d_volume);
  mm.extrinsic = max_abs_diff(dk, ocn.d_extrinsic);
  return mm;
}

}  // namespace

TEST_CASE("frame decomposition reconstructs the deformation") {
  const Scenario sc = make_random_smooth(3, 1, 4, 1.3);
  const Grid grid{48};
  const Patch pt = make_patch(sc, grid, 5, 0.5 * grid.spacing(0), 0.37);
  const PatchFrames pf = build_patch_frames(pt);
  const int s = pt.centre();
  const FrameData& fd = pf.frames[s];
  const int T = pt.total_dim();

  std::vector<std::vector<Real>> dX, dV;
  make_affine_ambient(pt, 5, 0.3, dX, dV);
  const DeformationDecomp dc = decompose_deformation(pt, fd, dX[s]);
  Real worst = 0;
  for (int p = 0; p < pt.npts(); ++p)
    for (int mu = 0; mu < T; ++mu) {
      Real v = 0;
      for (int a = 0; a < fd.world; ++a)
        v += dc.upper[static_cast<size_t>(p) * fd.world + a] * fd.e(p, a)[mu];
      for (int I = 0; I < fd.codim; ++I)
        v += dc.normal[static_cast<size_t>(p) * fd.codim + I] * fd.nrm(p, I)[mu];
      worst = std::max(worst, std::abs(v - dX[s][static_cast<size_t>(p) * T + mu]));
    }
  REQUIRE(worst < 1e-10);
}

TEST_CASE("metric and volume responses match central differences") {
  const Scenario sc = make_random_smooth(3, 1, 4, 1.3);
  const Grid grid{48};
  const Patch pt = make_patch(sc, grid, 5, 0.5 * grid.spacing(0), 0.37);
  const PatchFrames pf = build_patch_frames(pt);
  const int s = pt.centre();
  const FrameData& fd = pf.frames[s];
  const int W = fd.world;

  std::vector<std::vector<Real>> dX, dV;
  make_affine_ambient(pt, 7, 0.05, dX, dV);
  const MetricDeformation md = metric_deformation(pt, pf, dX, s);
  const DeformationOracle oc = deformation_oracle(pt, pf, dX, dV, 1e-5);

  const Real scale = max_abs(oc.d_metric);
  REQUIRE(scale > 1e-3);  // the probe actually deforms the metric
  CHECK(max_abs_diff(md.d_metric, oc.d_metric) < 2e-5);
  CHECK(max_abs_diff(md.d_metric_inv, oc.d_metric_inv) < 2e-5);
  CHECK(max_abs_diff(md.d_volume, oc.d_volume) < 1e-5);

  // The differenced pipeline must satisfy the matrix-inverse and determinant
  // response identities on its own (exact for true derivatives, so only the
  // eps**2 differencing error survives).
  Real worst_inv = 0, worst_vol = 0;
  for (int p = 0; p < pt.npts(); ++p) {
    const Real* G = fd.g(p);
    const Real* Gi = fd.ginv(p);
    for (int a = 0; a < W; ++a)
      for (int c = 0; c < W; ++c) {
        Real r = 0;
        for (int b = 0; b < W; ++b)
          r += oc.d_metric_inv[static_cast<size_t>(p) * W * W + a * W + b] * G[b * W + c] +
               Gi[a * W + b] * oc.d_metric[static_cast<size_t>(p) * W * W + b * W + c];
        worst_inv = std::max(worst_inv, std::abs(r));
      }
    Real tr = 0;
    for (int a = 0; a < W; ++a)
      for (int b = 0; b < W; ++b)
        tr += Gi[a * W + b] * oc.d_metric[static_cast<size_t>(p) * W * W + a * W + b];
    worst_vol = std::max(worst_vol, std::abs(oc.d_volume[p] - 0.5 * fd.volume[p] * tr));
  }
  CHECK(worst_inv < 1e-8);
  CHECK(worst_vol < 1e-8);

  // Formula-side trace identity holds only to discretization order: the
  // divergence form and the half-trace form differ by stencil commutators.
  Real worst_trace = 0;
  for (int p = 0; p < pt.npts(); ++p) {
    const Real* Gi = fd.ginv(p);
    Real tr = 0;
    for (int a = 0; a < W; ++a)
      for (int b = 0; b < W; ++b)
        tr += Gi[a * W + b] * md.d_metric[static_cast<size_t>(p) * W * W + a * W + b];
    worst_trace = std::max(worst_trace, std::abs(md.d_volume[p] - 0.5 * fd.volume[p] * tr));
  }
  CHECK(worst_trace < 1e-5);
}

TEST_CASE("extrinsic curvature response matches central differences") {
  const Scenario sc = make_random_smooth(3, 1, 4, 1.3);
  const Grid grid{48};
  const Patch pt = make_patch(sc, grid, 5, 0.5 * grid.spacing(0), 0.37);
  const PatchFrames pf = build_patch_frames(pt);
  const int s = pt.centre();
  const int codim = pf.frames[s].codim;

  const std::vector<std::vector<Real>> phi = make_affine_normal(pt, codim, 11, 0.05);
  std::vector<std::vector<Real>> dX, dV;
  normal_deformation_fields(pt, pf, phi, dX, dV);
  const std::vector<Real> dk = extrinsic_deformation(pt, pf, phi, s);
  const DeformationOracle oc = deformation_oracle(pt, pf, dX, dV, 1e-5);

  REQUIRE(max_abs(oc.d_extrinsic) > 1e-2);  // probe has teeth
  CHECK(max_abs_diff(dk, oc.d_extrinsic) < 5e-6);

  // Mean-curvature response assembled from the same formula pieces matches
  // the differenced trace.
  const std::vector<Real> dh = linearized_eom_apply(pt, pf, phi, s);
  CHECK(max_abs_diff(dh, oc.d_mean_curv) < 5e-6);

  // A purely normal deformation also feeds the metric response through the
  // curvature term alone; cross-check that path too.
  const MetricDeformation md = metric_deformation(pt, pf, dX, s);
  CHECK(max_abs_diff(md.d_metric, oc.d_metric) < 2e-5);
  CHECK(max_abs_diff(md.d_volume, oc.d_volume) < 2e-5);
}

TEST_CASE("deformation responses converge under grid refinement") {
  const std::vector<int> ns = {24, 32, 48, 64};
  std::vector<Real> hs, e_metric, e_vol, e_k;
  for (int n : ns) {
    const Mismatches mm = deformation_mismatches(n, 3);
    hs.push_back(kTwoPi / n);
    e_metric.push_back(mm.metric);
    e_vol.push_back(mm.volume);
    e_k.push_back(mm.extrinsic);
  }
  CHECK(fit_order(hs, e_metric) > 1.8);
  CHECK(fit_order(hs, e_vol) > 1.8);
  CHECK(fit_order(hs, e_k) > 1.8);
}

TEST_CASE("oracle differencing error scales quadratically in epsilon") {
  const Scenario sc = make_random_smooth(3, 1, 4, 1.3);
  const Grid grid{64};
  const Patch pt = make_patch(sc, grid, 5, 0.5 * grid.spacing(0), 0.37);
  const PatchFrames pf = build_patch_frames(pt);
  const int codim = pf.frames[pt.centre()].codim;

  // Large-amplitude probe so the eps**2 truncation dominates the h floor.
  const std::vector<std::vector<Real>> phi = make_affine_normal(pt, codim, 11, 0.5);
  std::vector<std::vector<Real>> dX, dV;
  normal_deformation_fields(pt, pf, phi, dX, dV);
  const DeformationOracle ref = deformation_oracle(pt, pf, dX, dV, 1e-5);
  std::vector<Real> es, ts;
  for (Real eps : {0.2, 0.1, 0.05}) {
    const DeformationOracle oc = deformation_oracle(pt, pf, dX, dV, eps);
    es.push_back(eps);
    ts.push_back(max_abs_diff(oc.d_extrinsic, ref.d_extrinsic));
  }
  REQUIRE(ts.front() > 1e-4);  // truncation visible above the floor
  CHECK(fit_order(es, ts) == Catch::Approx(2.0).margin(0.1));
}

TEST_CASE("ambient isometries are zero modes of the linearized operator") {
  const Mover mv = make_collapsing_loop_mover();
  const Scenario sc = mover_scenario(mv, "collapsing_loop");
  const Grid grid{96};
  const Real h = grid.spacing(0);
  const Patch pt = make_patch(sc, grid, 5, 0.5 * h, 0.3);
  const PatchFrames pf = build_patch_frames(pt);
  const int s = pt.centre();
  const int T = pt.total_dim();
  const int codim = pf.frames[s].codim;
  const int npts = pt.npts();

  // Each isometry of the ambient space maps solutions to solutions, so its
  // normal part must be annihilated by the linearized operator.
  auto run_mode = [&](auto&& fill) {
    std::vector<std::vector<Real>> phi(pt.depth);
    Real tangential = 0;
    for (int q = 0; q < pt.depth; ++q) {
      const Real tau = pt.tau0 + (q - pt.centre()) * pt.dtau;
      std::vector<Real> dX(static_cast<size_t>(npts) * T, 0.0);
      for (int p = 0; p < npts; ++p)
        fill(tau, pt.grid.coord(0, p), &dX[static_cast<size_t>(p) * T]);
      const DeformationDecomp dc = decompose_deformation(pt, pf.frames[q], dX);
      phi[q] = dc.normal;
      tangential = std::max(tangential, max_abs(dc.upper));
    }
    REQUIRE(tangential < 1e-13);  // these modes are exactly transverse
    return max_abs(linearized_eom_apply(pt, pf, phi, s));
  };

  const Real res_rot = run_mode([](Real tau, Real sg, Real* dX) {
    dX[3] = std::cos(sg) * std::cos(tau);  // rotation of the loop plane into z
  });
  const Real res_trans = run_mode([](Real, Real, Real* dX) { dX[3] = 1.0; });
  const Real res_compact = run_mode([](Real, Real, Real* dX) { dX[4] = 1.0; });
  CHECK(res_rot < 1e-3);
  // Constant transverse shifts have vanishing derivatives and never couple
  // to the curvature of this loop, so they are zero modes to roundoff.
  CHECK(res_trans < 1e-12);
  CHECK(res_compact < 1e-12);

  // A random transverse profile is not a zero mode: the operator must push
  // back at order one on the same worldvolume.
  const std::vector<std::vector<Real>> phi = make_affine_normal(pt, codim, 17, 1.0);
  const Real res_random = max_abs(linearized_eom_apply(pt, pf, phi, s));
  CHECK(res_random > 0.05);
}
