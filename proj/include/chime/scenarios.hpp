#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "chime/embedding.hpp"
#include "chime/spectral.hpp"

namespace chime {

// ---------------------------------------------------------------------------
// A scenario is an analytic worldvolume: periodic residual of the extended
// embedding plus winding slopes, with its tau derivative.  Timelike scenarios
// describe evolving strings/membranes; Riemannian ones are static surfaces
// used to validate curvature and twist against textbook values.
// ---------------------------------------------------------------------------
struct Scenario {
  std::string name;
  Background bg;
  Mode mode = Mode::Timelike;
  int dim = 1;                 // spatial grid directions
  std::vector<Real> winding;   // total_dim * dim; empty means none
  // Periodic residual of xbar and its tau derivative at (tau, xi).
  std::function<void(Real, const Real*, Real*)> pos;
  std::function<void(Real, const Real*, Real*)> vel;
  // Optional normal-frame seed candidates at xi, packed candidate-major.
  std::function<std::vector<Real>(const Real*)> seeds;
  // True when the embedding satisfies the wave-gauge conditions, i.e. the
  // state can be handed to the time evolver as initial data.
  bool evolvable = false;

  int total_dim() const { return bg.total_dim(); }
};

inline Patch make_patch(const Scenario& sc, const Grid& grid, int depth, Real dtau,
                        Real tau0) {
  require(grid.dim == sc.dim, "make_patch: grid dimension mismatch");
  Patch p;
  p.mode = sc.mode;
  p.grid = grid;
  p.bg = sc.bg;
  p.depth = sc.mode == Mode::Riemannian ? 1 : depth;
  p.dtau = sc.mode == Mode::Riemannian ? 0.0 : dtau;
  p.tau0 = tau0;
  p.winding = sc.winding;
  p.slices.resize(p.depth);
  const int T = sc.total_dim();
  const int npts = grid.points();
  std::array<Real, kMaxWorld> xi{};
  for (int s = 0; s < p.depth; ++s) {
    const Real tau = tau0 + (s - p.centre()) * p.dtau;
    Slice& sl = p.slices[s];
    sl.xbar.resize(static_cast<size_t>(npts) * T);
    if (sc.mode == Mode::Timelike) sl.vbar.resize(static_cast<size_t>(npts) * T);
    for (int q = 0; q < npts; ++q) {
      const auto idx = grid.unflat(q);
      for (int d = 0; d < grid.dim; ++d) xi[d] = grid.coord(d, idx[d]);
      sc.pos(tau, xi.data(), &sl.xbar[static_cast<size_t>(q) * T]);
      if (sc.mode == Mode::Timelike)
        sc.vel(tau, xi.data(), &sl.vbar[static_cast<size_t>(q) * T]);
    }
  }
  p.validate();
  return p;
}

// Adapt scenario seed candidates (functions of xi) to the per-point form the
// frame builder consumes.
inline std::function<std::vector<Real>(int)> make_seed_fn(const Scenario& sc,
                                                          const Grid& grid) {
  if (!sc.seeds) return {};
  auto seeds = sc.seeds;
  return [seeds, grid](int p) {
    std::array<Real, kMaxWorld> xi{};
    const auto idx = grid.unflat(p);
    for (int d = 0; d < grid.dim; ++d) xi[d] = grid.coord(d, idx[d]);
    return seeds(xi.data());
  };
}

// ---------------------------------------------------------------------------
// Seeded random trigonometric fields: sums of products of low harmonics with
// random amplitudes and phases.  Used for generic-surface property tests and
// for deformation directions.
// ---------------------------------------------------------------------------
struct RandomField {
  struct Term {
    Real amp;
    std::array<int, kMaxWorld> k;
    std::array<Real, kMaxWorld> phase;
  };
  int dim = 1;
  std::vector<Term> terms;

  Real eval(const Real* xi) const {
    Real s = 0;
    for (const Term& t : terms) {
      Real v = t.amp;
      for (int d = 0; d < dim; ++d) v *= std::cos(t.k[d] * xi[d] + t.phase[d]);
      s += v;
    }
    return s;
  }
};

inline RandomField make_random_field(SplitMix64& rng, int dim, int max_k, Real amp) {
  RandomField f;
  f.dim = dim;
  std::array<int, kMaxWorld> k{};
  // Iterate all harmonic tuples with at least one nonzero entry.
  const int span = max_k + 1;
  int tuples = 1;
  for (int d = 0; d < dim; ++d) tuples *= span;
  for (int t = 1; t < tuples; ++t) {
    int rem = t;
    Real decay = 1.0;
    for (int d = 0; d < dim; ++d) {
      k[d] = rem % span;
      rem /= span;
      decay /= (1.0 + k[d] * k[d]);
    }
    RandomField::Term term;
    term.k = k;
    term.amp = amp * decay * rng.uniform(-1.0, 1.0);
    for (int d = 0; d < dim; ++d) term.phase[d] = rng.uniform(0.0, kTwoPi);
    f.terms.push_back(term);
  }
  return f;
}

// ---------------------------------------------------------------------------
// Movers: d'Alembert data X(tau,sigma) = (a(sigma+tau) + b(sigma-tau)) / 2
// for closed strings.  Each extended component of a and b is a linear slope
// plus a trigonometric series.  Null movers (|a'|^2 = |b'|^2 = 0 in the
// extended metric) give exact wave-gauge solutions.
// ---------------------------------------------------------------------------
struct Mover {
  Background bg;
  std::vector<Real> slope_a, slope_b;      // total_dim
  std::vector<FourierSeries> per_a, per_b; // total_dim

  int total_dim() const { return bg.total_dim(); }

  void deriv_a(Real u, Real* out) const {
    for (int m = 0; m < total_dim(); ++m)
      out[m] = slope_a[m] + per_a[m].eval_derivative(u);
  }
  void deriv_b(Real v, Real* out) const {
    for (int m = 0; m < total_dim(); ++m)
      out[m] = slope_b[m] + per_b[m].eval_derivative(v);
  }

  // Largest violation of the null conditions over a dense parameter sample.
  Real null_residual(int samples = 512) const {
    std::vector<Real> da(total_dim()), db(total_dim());
    Real worst = 0;
    for (int j = 0; j < samples; ++j) {
      const Real u = kTwoPi * j / samples;
      deriv_a(u, da.data());
      deriv_b(u, db.data());
      worst = std::max(worst, std::abs(bg.inner(da.data(), da.data())));
      worst = std::max(worst, std::abs(bg.inner(db.data(), db.data())));
    }
    return worst;
  }
};

inline Scenario mover_scenario(const Mover& mv, const std::string& name) {
  Scenario sc;
  sc.name = name;
  sc.bg = mv.bg;
  sc.mode = Mode::Timelike;
  sc.dim = 1;
  sc.evolvable = true;
  const int T = mv.total_dim();
  sc.winding.assign(static_cast<size_t>(T) * 1, 0.0);
  bool any = false;
  for (int m = 0; m < T; ++m) {
    sc.winding[m] = 0.5 * (mv.slope_a[m] + mv.slope_b[m]);
    if (sc.winding[m] != 0.0) any = true;
  }
  if (!any) sc.winding.clear();
  sc.pos = [mv](Real tau, const Real* xi, Real* out) {
    const Real u = xi[0] + tau, v = xi[0] - tau;
    for (int m = 0; m < mv.total_dim(); ++m)
      out[m] = 0.5 * (mv.per_a[m].eval(u) + mv.per_b[m].eval(v)) +
               0.5 * (mv.slope_a[m] - mv.slope_b[m]) * tau;
  };
  sc.vel = [mv](Real tau, const Real* xi, Real* out) {
    const Real u = xi[0] + tau, v = xi[0] - tau;
    for (int m = 0; m < mv.total_dim(); ++m)
      out[m] = 0.5 * (mv.per_a[m].eval_derivative(u) -
                      mv.per_b[m].eval_derivative(v)) +
               0.5 * (mv.slope_a[m] - mv.slope_b[m]);
  };
  return sc;
}

// Unit circular loop that collapses to a point at tau = pi/2:
// X = (tau, cos sigma cos tau, sin sigma cos tau, 0, ...).
inline Mover make_collapsing_loop_mover(int base_dim = 4, Real g44 = 1.0) {
  Mover mv;
  mv.bg = Background(base_dim, g44);
  const int T = mv.total_dim();
  mv.slope_a.assign(T, 0.0);
  mv.slope_b.assign(T, 0.0);
  mv.per_a.resize(T);
  mv.per_b.resize(T);
  mv.slope_a[0] = 1.0;
  mv.slope_b[0] = -1.0;
  for (auto* per : {&mv.per_a, &mv.per_b}) {
    (*per)[1].ak = {1.0};  // cos u
    (*per)[1].bk = {0.0};
    (*per)[2].ak = {0.0};
    (*per)[2].bk = {1.0};  // sin u
  }
  return mv;
}

// Double rotator: the left mover turns in the (z, w) plane and carries the
// compact component c_a cos(u); the right mover turns in the (x, y) plane
// with compact amplitude c_b.  The planes are orthogonal, so the loop never
// develops cusps and the induced metric stays nondegenerate for all tau.
// c_b = 0 gives an exactly chiral loop (compact charge purely left-moving).
inline Mover make_double_rotator_mover(Real c_a, Real c_b, Real g44 = 1.0) {
  Mover mv;
  mv.bg = Background(5, g44);
  const int T = mv.total_dim();  // (t, x, y, z, w, phi)
  mv.slope_a.assign(T, 0.0);
  mv.slope_b.assign(T, 0.0);
  mv.per_a.resize(T);
  mv.per_b.resize(T);
  mv.slope_a[0] = 1.0;
  mv.slope_b[0] = -1.0;

  const int m = 256;  // sample count for the spectral fit
  auto build = [&](Real c, int comp_cos, int comp_sin, Real sign_sin,
                   std::vector<FourierSeries>& per) {
    std::vector<Real> scos(m), ssin(m), sphi(m);
    for (int j = 0; j < m; ++j) {
      const Real u = kTwoPi * j / m;
      const Real speed = std::sqrt(1.0 - g44 * c * c * std::cos(u) * std::cos(u));
      scos[j] = speed * std::cos(u);
      ssin[j] = sign_sin * speed * std::sin(u);
      sphi[j] = c * std::cos(u);
    }
    per[comp_cos] = fourier_fit(scos).antiderivative();
    per[comp_sin] = fourier_fit(ssin).antiderivative();
    per[T - 1] = fourier_fit(sphi).antiderivative();
  };
  build(c_a, 3, 4, +1.0, mv.per_a);
  // The right mover's compact series overwrites per_b[T-1]; with c_b = 0 it
  // is identically zero and the loop is chiral.
  build(c_b, 1, 2, -1.0, mv.per_b);
  require(mv.null_residual() < 1e-10, "double rotator: null residual too large");
  return mv;
}

// ---------------------------------------------------------------------------
// Sheets (infinite strings/membranes wrapped across the periodic box via
// winding slopes).
// ---------------------------------------------------------------------------

// Static flat sheet: X^0 = tau, X^d = sigma^d, everything else zero.
inline Scenario make_flat_sheet(int dim = 1, int base_dim = 4, Real g44 = 1.0) {
  Scenario sc;
  sc.name = "flat_sheet";
  sc.bg = Background(base_dim, g44);
  sc.mode = Mode::Timelike;
  sc.dim = dim;
  sc.evolvable = true;
  const int T = sc.total_dim();
  require(base_dim >= dim + 1, "flat_sheet: base dimension too small");
  sc.winding.assign(static_cast<size_t>(T) * dim, 0.0);
  for (int d = 0; d < dim; ++d) sc.winding[static_cast<size_t>(d + 1) * dim + d] = 1.0;
  sc.pos = [T](Real, const Real*, Real* out) {
    for (int mu = 0; mu < T; ++mu) out[mu] = 0.0;
  };
  sc.vel = [T](Real, const Real*, Real* out) {
    for (int mu = 0; mu < T; ++mu) out[mu] = 0.0;
    out[0] = 1.0;
  };
  return sc;
}

// Flat sheet moving transverse to itself with speed v (lab-frame slicing):
// X = (tau, sigma, v tau, 0, ...).  Energy density picks up a Lorentz factor.
inline Scenario make_boosted_sheet(Real v, int base_dim = 4, Real g44 = 1.0) {
  require(std::abs(v) < 1.0, "boosted_sheet: speed must be subluminal");
  Scenario sc = make_flat_sheet(1, base_dim, g44);
  sc.name = "boosted_sheet";
  sc.evolvable = true;
  const int T = sc.total_dim();
  sc.pos = [T, v](Real tau, const Real*, Real* out) {
    for (int mu = 0; mu < T; ++mu) out[mu] = 0.0;
    out[2] = v * tau;
  };
  sc.vel = [T, v](Real, const Real*, Real* out) {
    for (int mu = 0; mu < T; ++mu) out[mu] = 0.0;
    out[0] = 1.0;
    out[2] = v;
  };
  return sc;
}

// Flat sheet carrying a travelling compact wave phi = A sin(sigma + tau).
// Solves the full nonlinear worldvolume equations exactly, with vanishing
// chirality invariant, but does not satisfy the wave-gauge conditions used by
// the evolver diagnostics (the induced metric is not conformally flat).
inline Scenario make_chiral_sheet(Real amp, int base_dim = 4, Real g44 = 1.0) {
  Scenario sc = make_flat_sheet(1, base_dim, g44);
  sc.name = "chiral_sheet";
  sc.evolvable = false;
  const int T = sc.total_dim();
  sc.pos = [T, amp](Real tau, const Real* xi, Real* out) {
    for (int mu = 0; mu < T; ++mu) out[mu] = 0.0;
    out[T - 1] = amp * std::sin(xi[0] + tau);
  };
  sc.vel = [T, amp](Real tau, const Real* xi, Real* out) {
    for (int mu = 0; mu < T; ++mu) out[mu] = 0.0;
    out[0] = 1.0;
    out[T - 1] = amp * std::cos(xi[0] + tau);
  };
  return sc;
}

// Generic smooth affine-in-tau worldvolume around a flat sheet; every
// extended component receives independent random low-harmonic wiggles.
inline Scenario make_random_smooth(std::uint64_t seed, int dim = 1, int base_dim = 4,
                                   Real g44 = 1.0, Real amp = 0.05) {
  Scenario sc = make_flat_sheet(dim, base_dim, g44);
  sc.name = "random_smooth";
  sc.evolvable = false;
  const int T = sc.total_dim();
  SplitMix64 rng(seed);
  auto pos_fields = std::make_shared<std::vector<RandomField>>();
  auto vel_fields = std::make_shared<std::vector<RandomField>>();
  for (int mu = 0; mu < T; ++mu) {
    pos_fields->push_back(make_random_field(rng, dim, 2, amp));
    vel_fields->push_back(make_random_field(rng, dim, 2, amp));
  }
  // X^0 keeps its tau slope so the worldvolume stays timelike; the tau * 1
  // part is xi-independent and therefore still a periodic residual.
  sc.pos = [T, pos_fields, vel_fields](Real tau, const Real* xi, Real* out) {
    for (int mu = 0; mu < T; ++mu)
      out[mu] = (*pos_fields)[mu].eval(xi) + tau * (*vel_fields)[mu].eval(xi);
    out[0] += tau;
  };
  sc.vel = [T, vel_fields](Real, const Real* xi, Real* out) {
    for (int mu = 0; mu < T; ++mu) out[mu] = (*vel_fields)[mu].eval(xi);
    out[0] += 1.0;
  };
  return sc;
}

// ---------------------------------------------------------------------------
// Static Riemannian analysis surfaces (Euclidean base block).  These carry
// textbook curvature/twist values used as oracles.
// ---------------------------------------------------------------------------

// Circle of radius R in the (x, y) plane; base dimension 2.
inline Scenario make_analysis_circle(Real radius, Real g44 = 1.0) {
  Scenario sc;
  sc.name = "analysis_circle";
  sc.bg = Background(2, g44, /*lorentzian=*/false);
  sc.mode = Mode::Riemannian;
  sc.dim = 1;
  const int T = sc.total_dim();
  sc.pos = [T, radius](Real, const Real* xi, Real* out) {
    for (int mu = 0; mu < T; ++mu) out[mu] = 0.0;
    out[0] = radius * std::cos(xi[0]);
    out[1] = radius * std::sin(xi[0]);
  };
  return sc;
}

// Sphere of radius r, double-cover parametrization theta = xi^0 + h/2 with
// the half-step phase keeping every grid point away from the poles (the grid
// size along xi^0 must be even).  phi_azimuth = xi^1.
inline Scenario make_analysis_sphere(Real radius, int n_theta, Real g44 = 1.0) {
  require(n_theta % 2 == 0, "analysis_sphere: theta direction needs even n");
  Scenario sc;
  sc.name = "analysis_sphere";
  sc.bg = Background(3, g44, /*lorentzian=*/false);
  sc.mode = Mode::Riemannian;
  sc.dim = 2;
  const int T = sc.total_dim();
  const Real half = kPi / n_theta;  // h/2 with h = 2 pi / n
  sc.pos = [T, radius, half](Real, const Real* xi, Real* out) {
    for (int mu = 0; mu < T; ++mu) out[mu] = 0.0;
    const Real th = xi[0] + half, az = xi[1];
    out[0] = radius * std::sin(th) * std::cos(az);
    out[1] = radius * std::sin(th) * std::sin(az);
    out[2] = radius * std::cos(th);
  };
  return sc;
}

// Torus with ring radius R and tube radius r (R > r > 0).
inline Scenario make_analysis_torus(Real ring, Real tube, Real g44 = 1.0) {
  require(ring > tube && tube > 0, "analysis_torus: need R > r > 0");
  Scenario sc;
  sc.name = "analysis_torus";
  sc.bg = Background(3, g44, /*lorentzian=*/false);
  sc.mode = Mode::Riemannian;
  sc.dim = 2;
  const int T = sc.total_dim();
  sc.pos = [T, ring, tube](Real, const Real* xi, Real* out) {
    for (int mu = 0; mu < T; ++mu) out[mu] = 0.0;
    const Real th = xi[0], az = xi[1];
    const Real w = ring + tube * std::cos(th);
    out[0] = w * std::cos(az);
    out[1] = w * std::sin(az);
    out[2] = tube * std::sin(th);
  };
  return sc;
}

// Closed curve winding around two orthogonal planes of a 4d Euclidean base:
// (R cos xi, R sin xi, r cos m xi, r sin m xi).  Comes with an analytic
// normal frame whose twist is constant, used as the twist oracle:
// with N = sqrt(R^2 + r^2 m^2), seeding (n1, n2, n3) below gives
//   omega^(n1 n3) = r m / N,   omega^(n2 n3) = -m R / N,  omega^(n1 n2) = 0.
inline Scenario make_analysis_helix(Real ring, Real tube, int m, Real g44 = 1.0) {
  require(ring > 0 && tube > 0 && m >= 1, "analysis_helix: bad parameters");
  Scenario sc;
  sc.name = "analysis_helix";
  sc.bg = Background(4, g44, /*lorentzian=*/false);
  sc.mode = Mode::Riemannian;
  sc.dim = 1;
  const int T = sc.total_dim();
  sc.pos = [T, ring, tube, m](Real, const Real* xi, Real* out) {
    for (int mu = 0; mu < T; ++mu) out[mu] = 0.0;
    out[0] = ring * std::cos(xi[0]);
    out[1] = ring * std::sin(xi[0]);
    out[2] = tube * std::cos(m * xi[0]);
    out[3] = tube * std::sin(m * xi[0]);
  };
  sc.seeds = [T, ring, tube, m](const Real* xi) {
    const Real u = xi[0];
    const Real norm = std::sqrt(ring * ring + tube * tube * m * m);
    std::vector<Real> cand(3 * static_cast<size_t>(T), 0.0);
    // n1: unit radial of the (x, y) circle.
    cand[0] = std::cos(u);
    cand[1] = std::sin(u);
    // n2: unit radial of the (z, w) circle.
    cand[T + 2] = std::cos(m * u);
    cand[T + 3] = std::sin(m * u);
    // n3: orthogonal completion inside the two planes.
    cand[2 * T + 0] = -tube * m * std::sin(u) / norm;
    cand[2 * T + 1] = tube * m * std::cos(u) / norm;
    cand[2 * T + 2] = ring * std::sin(m * u) / norm;
    cand[2 * T + 3] = -ring * std::cos(m * u) / norm;
    return cand;
  };
  return sc;
}

}  // namespace chime
