#pragma once

#include "oit/common.hpp"

#include <string>
#include <vector>

namespace oit {

struct VerifyCheck {
  std::string suite;
  std::string name;
  bool passed = false;
  double value = 0.0;  // measured quantity
  double bound = 0.0;  // pass threshold
  std::string detail;
};

struct VerifyOptions {
  std::vector<std::string> suites;  // empty: all
  bool injectFault = false;         // flips a sign in the first butterfly recursion
  std::uint64_t seed = 0;
};

// recovery, interp, butterfly, nufft
const std::vector<std::string>& verify_suites();

// Property suites at N <= 512.
std::vector<VerifyCheck> run_verify(const VerifyOptions& opt);

}  // namespace oit
