#pragma once
// Runtime invariant suites behind the `verify` command: each suite
// re-measures the structural identities of one module on fresh seeded data
// and reports the residuals.

#include <string>
#include <vector>

namespace tpem {

struct VerifyItem {
  std::string name;
  double value;
  double tol;
  bool pass;
};

struct VerifyReport {
  std::string suite;
  std::vector<VerifyItem> items;
  bool pass() const {
    for (const auto& i : items)
      if (!i.pass) return false;
    return true;
  }
};

// suite: one of mesh, bd, impedance, material, evosolve, all.
std::vector<VerifyReport> run_verify(const std::string& suite, uint64_t seed);

std::string verify_report_to_text(const std::vector<VerifyReport>& reports);

}  // namespace tpem
