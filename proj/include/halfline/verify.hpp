#pragma once

// Acceptance checks, grouped into suites. Each criterion produces one or more
// named checks with a measured value, its bound and a verdict.

#include <memory>
#include <string>
#include <vector>

#include "halfline/config.hpp"
#include "halfline/hjb_control.hpp"

namespace halfline {

struct CheckResult {
  std::string name;
  double measured = 0.0;
  std::string relation = "<=";  // measured <relation> bound
  double bound = 0.0;
  bool pass = false;
};

struct CriterionResult {
  int id = 0;
  std::string name;
  std::vector<CheckResult> checks;
  double seconds = 0.0;  // wall time; not part of any manifest

  bool pass() const;
};

enum class Suite { Semigroup, Forward, Bsde, Hjb, Control, All };

/// semigroup | forward | bsde | hjb | control | all; throws ConfigError otherwise.
Suite parse_suite(const std::string& name);
std::string suite_name(Suite suite);
/// Criterion ids run by a suite (1..11; the determinism criterion runs the CLI twice).
std::vector<int> suite_criteria(Suite suite);
std::string criterion_name(int id);

/// Holds the configuration and the value functions shared between criteria.
class VerifyContext {
 public:
  explicit VerifyContext(ExperimentConfig config);

  const ExperimentConfig& config() const { return config_; }
  const ValueFunction& finite_value();
  const ValueFunction& stationary_value();

 private:
  ExperimentConfig config_;
  std::unique_ptr<ValueFunction> finite_;
  std::unique_ptr<ValueFunction> stationary_;
};

CriterionResult run_criterion(int id, VerifyContext& context);

}  // namespace halfline
