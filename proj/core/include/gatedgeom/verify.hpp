#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gatedgeom {

// One checked quantity: passes when |measured - expected| <= tolerance.
struct VerifyRecord {
  std::string theorem_id;
  std::string quantity;
  double expected = 0.0;
  double measured = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct VerifyOptions {
  std::vector<int> depth_layers{1, 2, 4, 8, 16};
  std::uint64_t seed = 0;
  int workers = 1;
  int robustness_trials = 200;
};

// Check identifiers in execution order.
const std::vector<std::string>& verify_selectors();

// Throws ConfigError for an unknown identifier.
std::vector<VerifyRecord> run_check(const std::string& id, const VerifyOptions& options);
std::vector<VerifyRecord> run_verify(const std::vector<std::string>& ids, const VerifyOptions& options);

bool all_passed(const std::vector<VerifyRecord>& records);

// {"records": [...], "pass": bool}
std::string verify_report_json(const std::vector<VerifyRecord>& records);

}  // namespace gatedgeom
