#pragma once

#include <map>
#include <utility>

#include "chime/core.hpp"

namespace chime {

// ---------------------------------------------------------------------------
// Discrete canonical phase space over one spatial slice: positions x_{p,mu}
// paired with momentum weights rho_{p,mu} (the momentum density times the
// cell measure), so {x_{p,mu}, rho_{q,nu}} = delta_{pq} delta_{mu nu}.
// Charges at most quadratic in (x, rho) close under the Poisson bracket, and
// the bracket acts on their coefficients exactly (sums of products), which
// makes algebra checks independent of any field data.
// ---------------------------------------------------------------------------

struct PhaseLayout {
  int npts = 0;
  int total = 0;  // ambient components per point

  int pairs() const { return npts * total; }
  int dim() const { return 2 * pairs(); }
  int pos(int p, int mu) const { return p * total + mu; }
  int mom(int p, int mu) const { return pairs() + p * total + mu; }
};

struct QuadraticCharge {
  Real constant = 0;
  std::map<int, Real> lin;                       // coefficient of z_i
  std::map<std::pair<int, int>, Real> quad;      // i <= j, coefficient of z_i z_j

  void add_lin(int i, Real c) {
    if (c == 0.0) return;
    lin[i] += c;
    if (lin[i] == 0.0) lin.erase(i);
  }
  void add_quad(int i, int j, Real c) {
    if (c == 0.0) return;
    const std::pair<int, int> key = i <= j ? std::make_pair(i, j) : std::make_pair(j, i);
    quad[key] += c;
    if (quad[key] == 0.0) quad.erase(key);
  }

  Real eval(const std::vector<Real>& z) const {
    Real v = constant;
    for (const auto& [i, c] : lin) v += c * z[i];
    for (const auto& [ij, c] : quad) v += c * z[ij.first] * z[ij.second];
    return v;
  }

  // Gradient row beta_{i,.}: dQ/dz_i = lin_i + sum_j beta_{ij} z_j.
  std::map<int, std::map<int, Real>> gradient_rows() const {
    std::map<int, std::map<int, Real>> rows;
    for (const auto& [ij, c] : quad) {
      const auto [i, j] = ij;
      if (i == j) {
        rows[i][i] += 2.0 * c;
      } else {
        rows[i][j] += c;
        rows[j][i] += c;
      }
    }
    for (const auto& [i, c] : lin) (void)rows[i];  // ensure row exists for linear part
    return rows;
  }

  Real lin_at(int i) const {
    const auto it = lin.find(i);
    return it == lin.end() ? 0.0 : it->second;
  }

  // Largest coefficient difference against another charge (constant, linear
  // and quadratic parts), used for exact algebra checks.
  Real max_coef_diff(const QuadraticCharge& o) const {
    Real m = std::abs(constant - o.constant);
    auto scan_lin = [&m](const std::map<int, Real>& a, const std::map<int, Real>& b) {
      for (const auto& [i, c] : a) {
        const auto it = b.find(i);
        m = std::max(m, std::abs(c - (it == b.end() ? 0.0 : it->second)));
      }
    };
    scan_lin(lin, o.lin);
    scan_lin(o.lin, lin);
    auto scan_quad = [&m](const std::map<std::pair<int, int>, Real>& a,
                          const std::map<std::pair<int, int>, Real>& b) {
      for (const auto& [ij, c] : a) {
        const auto it = b.find(ij);
        m = std::max(m, std::abs(c - (it == b.end() ? 0.0 : it->second)));
      }
    };
    scan_quad(quad, o.quad);
    scan_quad(o.quad, quad);
    return m;
  }

  QuadraticCharge scaled(Real f) const {
    QuadraticCharge out;
    out.constant = f * constant;
    for (const auto& [i, c] : lin) out.lin[i] = f * c;
    for (const auto& [ij, c] : quad) out.quad[ij] = f * c;
    return out;
  }

  QuadraticCharge plus(const QuadraticCharge& o) const {
    QuadraticCharge out = *this;
    out.constant += o.constant;
    for (const auto& [i, c] : o.lin) out.add_lin(i, c);
    for (const auto& [ij, c] : o.quad) out.add_quad(ij.first, ij.second, c);
    return out;
  }
};

// Poisson bracket {A, B} of two at-most-quadratic charges; the result is
// again at most quadratic with coefficients formed exactly from sums of
// products of the input coefficients.
inline QuadraticCharge poisson_bracket(const QuadraticCharge& a, const QuadraticCharge& b,
                                       const PhaseLayout& lay) {
  QuadraticCharge out;
  const auto rows_a = a.gradient_rows();
  const auto rows_b = b.gradient_rows();
  const int n = lay.pairs();
  auto row_of = [](const std::map<int, std::map<int, Real>>& rows,
                   int i) -> const std::map<int, Real>* {
    const auto it = rows.find(i);
    return it == rows.end() ? nullptr : &it->second;
  };

  // Collect the pair indices k where either side has activity.
  std::map<int, char> active;
  auto touch = [&](int i) {
    const int k = i < n ? i : i - n;
    active[k] = 1;
  };
  for (const auto& [i, c] : a.lin) touch(i);
  for (const auto& [ij, c] : a.quad) { touch(ij.first); touch(ij.second); }
  for (const auto& [i, c] : b.lin) touch(i);
  for (const auto& [ij, c] : b.quad) { touch(ij.first); touch(ij.second); }

  for (const auto& [k, flag] : active) {
    (void)flag;
    const int xk = k, rk = n + k;
    const Real a_x = a.lin_at(xk), a_r = a.lin_at(rk);
    const Real b_x = b.lin_at(xk), b_r = b.lin_at(rk);
    const auto* arow_x = row_of(rows_a, xk);
    const auto* arow_r = row_of(rows_a, rk);
    const auto* brow_x = row_of(rows_b, xk);
    const auto* brow_r = row_of(rows_b, rk);

    out.constant += a_x * b_r - a_r * b_x;
    if (brow_r)
      for (const auto& [j, c] : *brow_r) out.add_lin(j, a_x * c);
    if (arow_x)
      for (const auto& [j, c] : *arow_x) out.add_lin(j, b_r * c);
    if (brow_x)
      for (const auto& [j, c] : *brow_x) out.add_lin(j, -a_r * c);
    if (arow_r)
      for (const auto& [j, c] : *arow_r) out.add_lin(j, -b_x * c);
    if (arow_x && brow_r)
      for (const auto& [j, ca] : *arow_x)
        for (const auto& [l, cb] : *brow_r) out.add_quad(j, l, ca * cb);
    if (arow_r && brow_x)
      for (const auto& [j, ca] : *arow_r)
        for (const auto& [l, cb] : *brow_x) out.add_quad(j, l, -ca * cb);
  }
  return out;
}

}  // namespace chime
