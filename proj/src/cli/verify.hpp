#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace assoc::cli {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Built-in invariant checks on fixed fixtures and `instances` seeded random
// tables: closed-form 2x2 fit, W-matrix identity and score mean, sampling
// scheme invariance, IPF round trips, derivative checks and kernel agreement.
std::vector<CheckResult> run_verify(std::uint64_t seed, int instances);

}  // namespace assoc::cli
