#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace islands {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct VerifyOptions {
  std::vector<std::string> only;  // empty = every check
  bool flip_el_sign = false;      // mutation: the EL check must then fail
  std::uint64_t seed = 1;
  std::size_t restarts = 1;
};

// rescaling, volume, interpolation, el-residual, balance, lambda, concavity, stability
const std::vector<std::string>& verify_check_names();
std::vector<CheckResult> run_verify(const VerifyOptions& opt);

// Sum of 1-4 random tents (widths and centres inside the open interval),
// zero at both ends; n nodes.
std::vector<double> random_bumps(std::size_t n, std::mt19937_64& rng);

}  // namespace islands
