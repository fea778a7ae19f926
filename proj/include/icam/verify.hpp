#pragma once

// Self-check of the derivative machinery against finite differences, run by
// `icam verify`.

#include <cstdint>
#include <string>
#include <vector>

namespace icam {

struct VerifyOptions {
  std::uint64_t fixture_seed = 42;
  std::uint64_t sample_seed = 2024;
  std::size_t derivative_pairs = 20;
  std::size_t logit_vectors = 100;
  std::size_t distribution_pairs = 1000;
  /// Negative control: report f'' with the wrong sign.
  bool flip_second_derivative = false;
};

struct CheckResult {
  std::string name;
  double worst_error = 0.0;
  double tolerance = 0.0;
  bool relative = true;
  bool passed = false;
};

struct SuiteResult {
  std::string name;
  std::vector<CheckResult> checks;
  bool passed() const;
};

struct VerifyReport {
  std::vector<SuiteResult> suites;
  bool passed() const;
  /// One line per check, then an overall PASS/FAIL line.
  std::string to_text() const;
};

/// |a - b| / max(|a|, |b|); 0 when both are 0.
double relative_error(double a, double b);

VerifyReport run_verification(const VerifyOptions& options = {});

}  // namespace icam
