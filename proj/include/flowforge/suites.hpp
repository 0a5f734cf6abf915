#pragma once

// Verification suites.  Each suite evaluates a parameter grid, records the
// measured quantity next to its bound or expected slope, and marks every row
// pass or fail.

#include "flowforge/io.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace flowforge {

struct SuiteColumn {
  std::string name;
  std::string description;
};

struct SuiteResult {
  std::string suite;
  std::vector<SuiteColumn> columns;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> failures;  // one line per failing row
  json summary;                       // suite-level aggregates
  double seconds = 0.0;

  bool pass() const { return failures.empty(); }
};

// conditioning, variance, henon-order, euler-order, perturbation-order,
// lyapunov, convolution, wasserstein, solvability.
const std::vector<std::string>& suite_names();

// `params` holds suite-specific overrides; unknown keys raise ConfigError.
SuiteResult run_suite(const std::string& name, const json& params, std::uint64_t seed);

// Writes <suite>.csv, <suite>_summary.json and <suite>_schema.json.
void write_suite(const SuiteResult& result, const std::string& out_dir);

json suite_summary(const SuiteResult& result);

}  // namespace flowforge
