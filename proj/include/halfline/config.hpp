#pragma once

// Experiment configuration: one JSON document with sections grid, operator,
// dynamics, cost, initial, solver, stationary, verify, sweep and a seed.
// Missing keys keep their defaults; unknown keys are rejected.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "halfline/bsde.hpp"
#include "halfline/errors.hpp"

namespace halfline {

class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

struct ExperimentConfig {
  struct GridSection {
    double xi_max = 20.0;
    Index n = 200;
    std::string grading = "uniform";  // uniform | boundary_graded
    double theta = 0.5;
    std::string weight = "capped";  // capped | power
  } grid;
  struct OperatorSection {
    double lambda = 1.0;
    double m_shift = 0.0;
  } op;
  struct DynamicsSection {
    std::string name = "tanh";  // zero | linear (c) | tanh (amplitude)
    std::map<std::string, double> params{{"amplitude", 0.5}};
    double noise = 1.0;    // scale of the boundary noise (0: deterministic)
    double control = 0.0;  // constant boundary control for simulate-forward
  } dynamics;
  struct CostSection {
    std::string name = "quadratic_tracking";
    std::map<std::string, double> params{{"q", 1.0}, {"r", 1.0}, {"target", 0.5}, {"window", 2.0}, {"terminal_q", 1.0}};
    double u_min = -1.0;
    double u_max = 1.0;
    long n_grid = 41;
    double horizon = 1.0;
  } cost;
  struct InitialSection {
    std::string kind = "zero";  // zero | constant | steady (steady state of boundary value `value`)
    double value = 0.0;
  } initial;
  struct SolverSection {
    Index n_steps = 200;
    Index samples = 10000;
    double stationary_dt = 0.02;
    Index spectral_modes = 6;
    bool boundary_feature = true;
    int degree = 2;
    double ridge = 1e-8;
    double max_condition = 1e14;
    double truncation_tol = 1e-4;
    bool rate_diagnostic = true;
  } solver;
  struct StationarySection {
    double mu = 1.0;
    double m_shift = 2.0;
    double cap = 1.0;  // saturation of the quadratic state cost, keeps sup |Psi(., 0)| finite
  } stationary;
  struct VerifySection {
    Index random_states = 50;
    Index adversaries = 20;
    Index probes = 10000;
    Index qv_paths = 10000;
    Index fd_trials = 10;
  } verify;
  struct SweepSection {
    std::vector<double> times{0.0, 0.25, 0.5, 0.75};
    std::vector<double> radii{0.0, 0.5, 1.0, 2.0};
  } sweep;
  std::uint64_t seed = 1;
};

/// Parses and validates; throws ConfigError with the offending key.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
void validate(const ExperimentConfig& config);

/// Canonical JSON (every field, sorted keys).
std::string canonical_json(const ExperimentConfig& config);
/// FNV-1a 64 of the canonical JSON, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

std::shared_ptr<const Operator> make_operator(const ExperimentConfig& config, double m_shift);
Nonlinearity build_nonlinearity(const ExperimentConfig& config);
ControlSet build_controls(const ExperimentConfig& config);
/// Finite-horizon problem on the configured operator.
ControlProblem finite_problem(const ExperimentConfig& config);
/// Discounted problem: stationary.mu, operator shifted by stationary.m_shift,
/// quadratic tracking saturated at stationary.cap unless the cost sets its own cap.
ControlProblem stationary_problem(const ExperimentConfig& config);
McConfig mc_config(const ExperimentConfig& config);
Eigen::VectorXd initial_state(const ExperimentConfig& config, const Operator& op);

}  // namespace halfline
