#pragma once

#include <string>
#include <vector>

namespace kecbf {

/// Outcome of one self-check: worst residual observed against its tolerance.
struct CheckResult {
  std::string name;
  double worst = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

std::vector<CheckResult> verify_dynamics();
std::vector<CheckResult> verify_qp();
std::vector<CheckResult> verify_filter();
std::vector<CheckResult> verify_simulator();

/// Runs every suite. All checks are deterministic (fixed seeds).
std::vector<CheckResult> verify_all();

} // namespace kecbf
