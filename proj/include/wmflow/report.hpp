#pragma once

#include <cmath>
#include <map>
#include <string>

#include "wmflow/errors.hpp"

namespace wmflow {

enum class CheckStatus { Pass, Fail, Inconclusive };

inline const char* to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::Pass: return "pass";
    case CheckStatus::Fail: return "fail";
    case CheckStatus::Inconclusive: return "inconclusive";
  }
  return "unknown";
}

/// Outcome of one inequality check: passed iff slack = rhs - lhs >= -tolerance.
struct CheckReport {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  double tolerance = 0.0;
  bool passed = true;
  CheckStatus status = CheckStatus::Pass;
  std::map<std::string, double> context;

  static CheckReport make(std::string name, double lhs, double rhs, double tolerance) {
    CheckReport r;
    r.name = std::move(name);
    r.lhs = lhs;
    r.rhs = rhs;
    r.slack = rhs - lhs;
    r.tolerance = tolerance;
    r.passed = r.slack >= -tolerance;
    r.status = r.passed ? CheckStatus::Pass : CheckStatus::Fail;
    return r;
  }
};

/// Centralized checker tolerances. `strict` tightens every absolute and
/// relative slack by a factor of 100.
struct ToleranceTable {
  static constexpr const char* kVersion = "1";

  std::string profile = "default";
  double energy_lower_bound = 1e-10;  // absolute
  double laplace_rel = 1e-10;         // relative to 1 + lhs
  double lions_villani_rel = 1e-8;    // relative to 1 + rhs
  double flow_interchange = 1e-6;     // absolute
  double entropy_dissipation = 1e-8;  // relative to 1 + rhs
  double energy_estimate_rel = 1e-8;  // relative to 1 + |E0|
  double holder = 1e-6;               // absolute
  double mass_rel = 1e-12;

  static ToleranceTable make(const std::string& profile) {
    ToleranceTable t;
    if (profile == "default") return t;
    if (profile != "strict") throw Error(ErrorKind::ConfigError, "unknown tolerance profile '" + profile + "'");
    t.profile = profile;
    t.energy_lower_bound *= 1e-2;
    t.laplace_rel *= 1e-2;
    t.lions_villani_rel *= 1e-2;
    t.flow_interchange *= 1e-2;
    t.entropy_dissipation *= 1e-2;
    t.energy_estimate_rel *= 1e-2;
    t.holder *= 1e-2;
    return t;
  }

  std::map<std::string, double> as_map() const {
    return {{"energy_lower_bound", energy_lower_bound}, {"laplace_rel", laplace_rel},
            {"lions_villani_rel", lions_villani_rel},   {"flow_interchange", flow_interchange},
            {"entropy_dissipation", entropy_dissipation}, {"energy_estimate_rel", energy_estimate_rel},
            {"holder", holder},                          {"mass_rel", mass_rel}};
  }
};

}  // namespace wmflow
