#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace statsep::oracle {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct OracleOptions {
  std::uint64_t seed = 2024;
  std::size_t threads = 1;
  // Negative control: compare against a threshold of 2 sigma^2 instead of
  // 3 sigma^2. The scalar quadratic check must then fail.
  bool forced_bug = false;
};

// Numerical minima of the Monte Carlo loss for phi(x) = x^2 against the
// square-root threshold rule.
CheckResult check_scalar_threshold(const OracleOptions& options);
// A vanilla run with an injective linear representation recovers y.
CheckResult check_linear_recovery(const OracleOptions& options);
// Numerical minima of the Monte Carlo loss for phi(x) = ||A x||^2 against
// the spectral characterization.
CheckResult check_spectral_minimum(const OracleOptions& options);

std::vector<CheckResult> run_all(const OracleOptions& options);
void print_table(std::ostream& out, const std::vector<CheckResult>& results);

}  // namespace statsep::oracle
