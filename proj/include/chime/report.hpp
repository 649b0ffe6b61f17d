#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "chime/config.hpp"

namespace chime {

// One named check: a measured value against a threshold.  Most checks are
// upper bounds; negative controls (e.g. "the non-chiral run must show a
// chirality signal") are lower bounds.
struct CheckResult {
  std::string name;
  Real measured = 0.0;
  Real threshold = 0.0;
  bool lower_bound = false;
  bool pass = false;
};

inline CheckResult check_upper(const std::string& name, Real measured, Real threshold) {
  return {name, measured, threshold, false, measured <= threshold};
}

inline CheckResult check_lower(const std::string& name, Real measured, Real threshold) {
  return {name, measured, threshold, true, measured >= threshold};
}

// Assembled result of one CLI invocation.  Every enabled check appears
// exactly once; the overall status is their conjunction.  Wall-clock time is
// kept out of the serialized forms so that all files an invocation writes
// are byte-reproducible; it is printed on stdout instead.
struct RunReport {
  std::string command;
  std::string scenario;
  Json params;  // resolved config echo plus effective flags
  std::vector<CheckResult> checks;
  std::vector<std::pair<std::string, Real>> info;  // context values, not gated
  double wall_seconds = 0.0;

  bool overall() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

inline Json report_json(const RunReport& r) {
  Json j = Json::object();
  j["command"] = r.command;
  j["scenario"] = r.scenario;
  j["params"] = r.params;
  Json checks = Json::array();
  for (const auto& c : r.checks) {
    Json e = Json::object();
    e["name"] = c.name;
    e["measured"] = c.measured;
    e["threshold"] = c.threshold;
    e["bound"] = c.lower_bound ? "lower" : "upper";
    e["pass"] = c.pass;
    checks.push_back(e);
  }
  j["checks"] = checks;
  Json info = Json::object();
  for (const auto& kv : r.info) info[kv.first] = kv.second;
  j["info"] = info;
  j["overall"] = r.overall() ? "PASS" : "FAIL";
  return j;
}

inline RunReport report_from_json(const Json& j) {
  RunReport r;
  r.command = j.at("command").get<std::string>();
  r.scenario = j.at("scenario").get<std::string>();
  r.params = j.at("params");
  for (const auto& e : j.at("checks")) {
    CheckResult c;
    c.name = e.at("name").get<std::string>();
    c.measured = e.at("measured").get<Real>();
    c.threshold = e.at("threshold").get<Real>();
    c.lower_bound = e.at("bound").get<std::string>() == "lower";
    c.pass = e.at("pass").get<bool>();
    r.checks.push_back(c);
  }
  for (const auto& item : j.at("info").items())
    r.info.emplace_back(item.key(), item.value().get<Real>());
  return r;
}

namespace detail {

inline std::string fmt_compact(Real x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

}  // namespace detail

inline std::string report_text(const RunReport& r) {
  std::string out = "chime " + r.command + " : scenario " + r.scenario + "\n";
  size_t width = 0;
  for (const auto& c : r.checks) width = std::max(width, c.name.size());
  for (const auto& c : r.checks) {
    out += c.pass ? "[PASS] " : "[FAIL] ";
    out += c.name;
    out.append(width + 2 - c.name.size(), ' ');
    out += detail::fmt_compact(c.measured);
    out += c.lower_bound ? " >= " : " <= ";
    out += detail::fmt_compact(c.threshold);
    out += '\n';
  }
  for (const auto& kv : r.info)
    out += "  info " + kv.first + " = " + detail::fmt_compact(kv.second) + "\n";
  out += "overall: ";
  out += r.overall() ? "PASS" : "FAIL";
  out += " (" + std::to_string(r.checks.size()) + " checks)\n";
  return out;
}

}  // namespace chime
