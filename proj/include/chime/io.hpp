#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "chime/dynamics.hpp"

namespace chime {

// 17 significant digits round-trip IEEE doubles exactly and keep every file
// byte-stable across runs of the same binary.
inline std::string fmt17(Real x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

namespace detail {

inline void append_row(std::string& out, const std::vector<Real>& vals) {
  for (size_t i = 0; i < vals.size(); ++i) {
    if (i) out += ',';
    out += fmt17(vals[i]);
  }
  out += '\n';
}

inline std::string header_row(const std::vector<std::string>& cols) {
  std::string out;
  for (size_t i = 0; i < cols.size(); ++i) {
    if (i) out += ',';
    out += cols[i];
  }
  out += '\n';
  return out;
}

}  // namespace detail

// Generic table: header row then one %.17g row per entry.
inline std::string csv_table(const std::vector<std::string>& header,
                             const std::vector<std::vector<Real>>& rows) {
  std::string out = detail::header_row(header);
  for (const auto& r : rows) {
    require(r.size() == header.size(), "csv_table: row width mismatch");
    detail::append_row(out, r);
  }
  return out;
}

// Charge time series: tau, the momentum components P0..P{T-1}, the angular
// block M{mu}{nu} over the upper triangle in lexicographic order, then the
// drift of every component relative to the first row (same order, prefixed
// with "d").
inline std::string charges_csv(const std::vector<DiagnosticsRow>& rows, int total) {
  std::vector<std::string> cols;
  cols.push_back("tau");
  for (int mu = 0; mu < total; ++mu) cols.push_back("P" + std::to_string(mu));
  for (int mu = 0; mu < total; ++mu)
    for (int nu = mu + 1; nu < total; ++nu)
      cols.push_back("M" + std::to_string(mu) + std::to_string(nu));
  const size_t ncharges = cols.size() - 1;
  for (size_t i = 0; i < ncharges; ++i) cols.push_back("d" + cols[1 + i]);

  auto flat = [total](const DiagnosticsRow& r) {
    std::vector<Real> v;
    for (int mu = 0; mu < total; ++mu) v.push_back(r.charges.P[mu]);
    for (int mu = 0; mu < total; ++mu)
      for (int nu = mu + 1; nu < total; ++nu) v.push_back(r.charges.m(mu, nu, total));
    return v;
  };

  std::string out = detail::header_row(cols);
  std::vector<Real> base;
  for (const auto& r : rows) {
    const std::vector<Real> c = flat(r);
    if (base.empty()) base = c;
    std::vector<Real> vals;
    vals.push_back(r.tau);
    vals.insert(vals.end(), c.begin(), c.end());
    for (size_t i = 0; i < c.size(); ++i) vals.push_back(c[i] - base[i]);
    detail::append_row(out, vals);
  }
  return out;
}

// Per-row scalar diagnostics of a run.
inline std::string diagnostics_csv(const std::vector<DiagnosticsRow>& rows) {
  static const std::vector<std::string> cols = {
      "step",  "tau",        "c_plus", "c_minus", "energy", "chirality",
      "eom",   "wave",       "base",   "stress_gap", "div_p", "div_f"};
  std::string out = detail::header_row(cols);
  for (const auto& r : rows)
    detail::append_row(out, {static_cast<Real>(r.step), r.tau, r.c_plus, r.c_minus,
                             r.energy, r.chirality, r.eom, r.wave, r.base, r.stress_gap,
                             r.div_p, r.div_f});
  return out;
}

// Flat frame dump: one row per (point, frame row, ambient component).  Frame
// rows 0..world-1 are the tangents e_a; rows world..world+codim-1 are the
// normals n_I.
inline std::string frames_csv(const Patch& pt, const FrameData& fd) {
  std::string out = detail::header_row({"point", "row", "mu", "value"});
  const int W = fd.world, T = fd.total, K = fd.codim;
  for (int p = 0; p < pt.npts(); ++p) {
    for (int a = 0; a < W; ++a)
      for (int mu = 0; mu < T; ++mu)
        detail::append_row(out, {static_cast<Real>(p), static_cast<Real>(a),
                                 static_cast<Real>(mu), fd.e(p, a)[mu]});
    for (int I = 0; I < K; ++I)
      for (int mu = 0; mu < T; ++mu)
        detail::append_row(out, {static_cast<Real>(p), static_cast<Real>(W + I),
                                 static_cast<Real>(mu), fd.nrm(p, I)[mu]});
  }
  return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "cannot write file " + path.string());
  out << content;
  require(static_cast<bool>(out), "failed writing file " + path.string());
}

}  // namespace chime
