#include <catch2/catch_amalgamated.hpp>

#include "chime/frames.hpp"
#include "chime/scenarios.hpp"

using namespace chime;

namespace {

// Mean curvature vector Gamma^ab K^I_ab n_I^mu at one point.
std::vector<Real> mean_curvature_vector(const FrameData& fd, const CurvatureData& cd,
                                        int p) {
  const int W = fd.world, T = fd.total;
  std::vector<Real> h(T, 0.0);
  const Real* Gi = fd.ginv(p);
  for (int I = 0; I < fd.codim; ++I) {
    Real trace = 0;
    for (int a = 0; a < W; ++a)
      for (int b = 0; b < W; ++b) trace += Gi[a * W + b] * cd.K(p, I, a, b);
    for (int mu = 0; mu < T; ++mu) h[mu] += trace * fd.nrm(p, I)[mu];
  }
  return h;
}

Real max_abs_range(const std::vector<Real>& v) { return max_abs(v); }

}  // namespace

TEST_CASE("flat sheet frames are exact") {
  for (int dim : {1, 2}) {
    const Scenario sc = make_flat_sheet(dim, 4, 1.5);
    const Grid grid = dim == 1 ? Grid{16} : Grid{12, 8};
    const Patch patch = make_patch(sc, grid, 3, 0.05, 0.2);
    const auto frames = build_frames(patch);
    const FrameData& fd = frames[1];
    const int W = fd.world;
    for (int p = 0; p < patch.npts(); ++p) {
      for (int a = 0; a < W; ++a)
        for (int b = 0; b < W; ++b) {
          const Real want = a != b ? 0.0 : (a == 0 ? -1.0 : 1.0);
          REQUIRE(fd.g(p)[a * W + b] == Catch::Approx(want).margin(1e-14));
        }
      REQUIRE(fd.volume[p] == Catch::Approx(1.0).margin(1e-14));
      REQUIRE(fd.chirality[p] == Catch::Approx(0.0).margin(1e-14));
    }
    REQUIRE(frame_orthonormality_residual(patch, fd) < 1e-12);
    REQUIRE(completeness_residual(patch, fd) < 1e-12);
    const CurvatureData cd = build_curvature(patch, frames, 1);
    REQUIRE(max_abs_range(cd.extrinsic) < 1e-12);
    REQUIRE(max_abs_range(cd.twist) < 1e-12);
    REQUIRE(max_abs_range(cd.christoffel) < 1e-12);
    const auto [re, rn] = frame_evolution_residual(patch, fd, cd);
    REQUIRE(re < 1e-12);
    REQUIRE(rn < 1e-12);
  }
}

TEST_CASE("circle curvature matches 1/R outward") {
  const Real R = 0.8;
  const Scenario sc = make_analysis_circle(R);
  const Grid grid{64};
  const Patch patch = make_patch(sc, grid, 1, 0.0, 0.0);
  const auto frames = build_frames(patch);
  const FrameData& fd = frames[0];
  const CurvatureData cd = build_curvature(patch, frames, 0);
  for (int p = 0; p < patch.npts(); ++p) {
    REQUIRE(fd.volume[p] == Catch::Approx(R).margin(1e-10));
    const auto h = mean_curvature_vector(fd, cd, p);
    const Real s = grid.coord(0, p);
    REQUIRE(h[0] == Catch::Approx(std::cos(s) / R).margin(1e-6));
    REQUIRE(h[1] == Catch::Approx(std::sin(s) / R).margin(1e-6));
    REQUIRE(h[2] == Catch::Approx(0.0).margin(1e-6));
  }
}

TEST_CASE("alignment keeps loop normals continuous where raw pivoting jumps") {
  const Scenario sc = make_analysis_circle(1.0);
  const Grid grid{64};
  const Patch patch = make_patch(sc, grid, 1, 0.0, 0.0);

  // Raw pointwise construction: provably discontinuous around the loop.
  FrameData raw = frame_slice_basic(patch, 0);
  add_normals(patch, raw, {});
  Real raw_jump = 0;
  for (int p = 0; p < patch.npts(); ++p) {
    const int q = (p + 1) % patch.npts();
    for (int I = 0; I < raw.codim; ++I) {
      Real d = 0;
      for (int mu = 0; mu < raw.total; ++mu)
        d = std::max(d, std::abs(raw.nrm(p, I)[mu] - raw.nrm(q, I)[mu]));
      raw_jump = std::max(raw_jump, d);
    }
  }
  REQUIRE(raw_jump > 0.5);

  // Aligned pipeline: neighbour frames differ by O(h), seam included.
  const auto frames = build_frames(patch);
  Real aligned_jump = 0;
  for (int p = 0; p < patch.npts(); ++p) {
    const int q = (p + 1) % patch.npts();
    for (int I = 0; I < frames[0].codim; ++I) {
      Real d = 0;
      for (int mu = 0; mu < frames[0].total; ++mu)
        d = std::max(d, std::abs(frames[0].nrm(p, I)[mu] - frames[0].nrm(q, I)[mu]));
      aligned_jump = std::max(aligned_jump, d);
    }
  }
  REQUIRE(aligned_jump < 2.5 * grid.spacing(0));
}

TEST_CASE("sphere mean curvature is 2/r radially outward") {
  const Real r = 1.0;
  const int n_theta = 32;
  const Scenario sc = make_analysis_sphere(r, n_theta);
  const Grid grid{n_theta, 32};
  const Patch patch = make_patch(sc, grid, 1, 0.0, 0.0);
  const auto frames = build_frames(patch);
  const FrameData& fd = frames[0];
  const CurvatureData cd = build_curvature(patch, frames, 0);
  const Slice& sl = patch.slices[0];
  const int T = patch.total_dim();
  for (int p = 0; p < patch.npts(); ++p) {
    const auto h = mean_curvature_vector(fd, cd, p);
    for (int mu = 0; mu < 3; ++mu) {
      const Real want = 2.0 / r * sl.xbar[static_cast<size_t>(p) * T + mu] / r;
      REQUIRE(h[mu] == Catch::Approx(want).margin(5e-3));
    }
    REQUIRE(std::abs(h[3]) < 5e-3);
  }
  REQUIRE(frame_orthonormality_residual(patch, fd) < 1e-10);
  REQUIRE(completeness_residual(patch, fd) < 1e-9);
}

TEST_CASE("torus mean curvature matches the two-radii formula") {
  const Real R = 1.0, r = 0.3;
  const Scenario sc = make_analysis_torus(R, r);
  const Grid grid{32, 32};
  const Patch patch = make_patch(sc, grid, 1, 0.0, 0.0);
  const auto frames = build_frames(patch);
  const CurvatureData cd = build_curvature(patch, frames, 0);
  const FrameData& fd = frames[0];
  REQUIRE(frame_orthonormality_residual(patch, fd) < 1e-10);
  for (int p = 0; p < patch.npts(); ++p) {
    const auto idx = grid.unflat(p);
    const Real th = grid.coord(0, idx[0]), az = grid.coord(1, idx[1]);
    const Real mean = 1.0 / r + std::cos(th) / (R + r * std::cos(th));
    const Real nout[3] = {std::cos(th) * std::cos(az), std::cos(th) * std::sin(az),
                          std::sin(th)};
    const auto h = mean_curvature_vector(fd, cd, p);
    for (int mu = 0; mu < 3; ++mu)
      REQUIRE(h[mu] == Catch::Approx(mean * nout[mu]).margin(2e-3));
  }
}

TEST_CASE("seeded frame reproduces the analytic twist of a doubly wound curve") {
  const Real R = 1.0, r = 0.3;
  const int m = 2;
  const Scenario sc = make_analysis_helix(R, r, m);
  const Grid grid{256};
  const Patch patch = make_patch(sc, grid, 1, 0.0, 0.0);
  const auto frames = build_frames(patch, make_seed_fn(sc, grid));
  const FrameData& fd = frames[0];
  REQUIRE(fd.codim == 4);
  REQUIRE(frame_orthonormality_residual(patch, fd) < 1e-10);
  const CurvatureData cd = build_curvature(patch, frames, 0);
  const Real N = std::sqrt(R * R + r * r * m * m);
  for (int p = 0; p < patch.npts(); ++p) {
    // Normal order: compact ansatz first, then the three seeded normals.
    REQUIRE(cd.om(p, 0, 1, 3) == Catch::Approx(r * m / N).margin(1e-5));
    REQUIRE(cd.om(p, 0, 2, 3) == Catch::Approx(-m * R / N).margin(1e-5));
    REQUIRE(cd.om(p, 0, 1, 2) == Catch::Approx(0.0).margin(1e-5));
    for (int I = 0; I < 4; ++I) {
      REQUIRE(cd.om(p, 0, 0, I) == Catch::Approx(0.0).margin(1e-5));
    }
    // Extrinsic curvature of the curve against the seeded normals.
    REQUIRE(cd.K(p, 1, 0, 0) == Catch::Approx(R).margin(1e-5));
    REQUIRE(cd.K(p, 2, 0, 0) == Catch::Approx(r * m * m).margin(1e-5));
    REQUIRE(cd.K(p, 3, 0, 0) == Catch::Approx(0.0).margin(1e-5));
  }
}

TEST_CASE("generic smooth worldvolumes satisfy the frame identities") {
  struct Case {
    int dim;
    Grid grid;
    Real tol_gw;
  };
  const Case cases[] = {{1, Grid{48}, 2e-5}, {2, Grid{20, 20}, 2e-3}};
  for (const Case& c : cases) {
    const Scenario sc = make_random_smooth(2026, c.dim, 4, 1.3);
    const Patch patch = make_patch(sc, c.grid, 3, 1e-3, 0.15);
    const auto frames = build_frames(patch);
    const FrameData& fd = frames[1];
    REQUIRE(frame_orthonormality_residual(patch, fd) < 1e-10);
    REQUIRE(completeness_residual(patch, fd) < 1e-9);
    // Factorized determinant identity of the rank-one metric extension.
    for (int p = 0; p < patch.npts(); ++p) {
      const Real lhs = fd.metric_det[p];
      const Real rhs = fd.base_det[p] * (1.0 + patch.bg.g44 * fd.chirality[p]);
      REQUIRE(lhs == Catch::Approx(rhs).epsilon(1e-11));
    }
    const CurvatureData cd = build_curvature(patch, frames, 1);
    const auto [re, rn] = frame_evolution_residual(patch, fd, cd);
    REQUIRE(re < c.tol_gw);
    REQUIRE(rn < c.tol_gw);
  }
}

TEST_CASE("travelling compact wave is chiral down to the stencil floor") {
  // The only nonzero contribution is the stencil dispersion of the compact
  // gradient, of size A^2 h^4 / 15; check it at two resolutions.
  const Scenario sc = make_chiral_sheet(0.1, 4, 1.0);
  struct Case {
    int n;
    Real bound;
  };
  for (const Case& c : {Case{64, 2e-7}, Case{256, 1e-9}}) {
    const Patch patch = make_patch(sc, Grid{c.n}, 3, 0.01, 0.4);
    const auto frames = build_frames(patch);
    for (const FrameData& fd : frames)
      for (int p = 0; p < patch.npts(); ++p)
        REQUIRE(std::abs(fd.chirality[p]) < c.bound);
  }
}

TEST_CASE("exact string solutions have vanishing mean curvature vector") {
  // Collapsing circular loop partway through its collapse.
  {
    const Mover mv = make_collapsing_loop_mover();
    const Scenario sc = mover_scenario(mv, "collapsing_loop");
    const Patch patch = make_patch(sc, Grid{96}, 3, 2e-3, 0.3);
    const auto frames = build_frames(patch);
    const CurvatureData cd = build_curvature(patch, frames, 1);
    for (int p = 0; p < patch.npts(); ++p) {
      const auto h = mean_curvature_vector(frames[1], cd, p);
      REQUIRE(max_abs_range(h) < 1e-4);
    }
  }
  // Chiral double rotator carrying a compact wave.
  {
    const Mover mv = make_double_rotator_mover(0.3, 0.0);
    const Scenario sc = mover_scenario(mv, "chiral_loop");
    const Patch patch = make_patch(sc, Grid{96}, 3, 2e-3, 0.7);
    const auto frames = build_frames(patch);
    const CurvatureData cd = build_curvature(patch, frames, 1);
    Real worst_chi = 0;
    for (int p = 0; p < patch.npts(); ++p) {
      const auto h = mean_curvature_vector(frames[1], cd, p);
      REQUIRE(max_abs_range(h) < 1e-4);
      worst_chi = std::max(worst_chi, std::abs(frames[1].chirality[p]));
    }
    REQUIRE(worst_chi < 1e-8);
  }
  // Non-chiral control: the chirality invariant is visibly nonzero.
  {
    const Mover mv = make_double_rotator_mover(0.5, 0.5);
    const Scenario sc = mover_scenario(mv, "nonchiral_loop");
    const Patch patch = make_patch(sc, Grid{96}, 3, 2e-3, 0.7);
    const auto frames = build_frames(patch);
    const CurvatureData cd = build_curvature(patch, frames, 1);
    Real worst_chi = 0;
    for (int p = 0; p < patch.npts(); ++p) {
      const auto h = mean_curvature_vector(frames[1], cd, p);
      REQUIRE(max_abs_range(h) < 1e-4);
      worst_chi = std::max(worst_chi, std::abs(frames[1].chirality[p]));
    }
    REQUIRE(worst_chi > 1e-2);
  }
}
