#pragma once

// Value function v(t, x) = Y_t^{t,x} (or v(x) = Y_0^x when discounted), the
// feedback u = gamma(t, z(t, x)), closed-loop costs and the checks tying them
// together: mild HJB residual, J >= v, quadratic-variation and Markov identification.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "halfline/bsde.hpp"

namespace halfline {

/// Stream blocks used for fresh (validation) paths, far from the training streams.
inline constexpr std::uint64_t kValidationStreams = std::uint64_t(1) << 40;

class ValueFunction {
 public:
  /// Solves the BSDE from (t0, x0). In discounted mode t0 must be 0.
  ValueFunction(ControlProblem problem, McConfig mc, Eigen::VectorXd x0, double t0 = 0.0,
                std::uint64_t stream_offset = 0);

  const ControlProblem& problem() const { return problem_; }
  const McConfig& mc() const { return mc_; }
  const Eigen::VectorXd& x0() const { return x0_; }
  const BsdeSolution& solution() const { return solution_; }
  const FeatureMap& features() const { return features_; }

  Estimate value() const { return evaluate_value(solution_); }
  Index n_steps() const { return solution_.n_steps(); }
  double dt() const { return solution_.dt; }
  double time(Index i) const { return solution_.time(i); }
  /// Step whose interval [t_i, t_{i+1}) holds t (clamped to the grid).
  Index step_at(double t) const;

  /// z(t_i, x) and v(t_i, x) for every column of x; v at i = N is the terminal value.
  Eigen::VectorXd z_hat(Index i, const Eigen::MatrixXd& x) const;
  Eigen::VectorXd v_hat(Index i, const Eigen::MatrixXd& x) const;

 private:
  ControlProblem problem_;
  McConfig mc_;
  Eigen::VectorXd x0_;
  FeatureMap features_;
  BsdeSolution solution_;
};

/// Fresh forward ensemble from (t, x) plus backward solve.
Estimate value(const ControlProblem& problem, const McConfig& mc, double t, const Eigen::VectorXd& x);

struct FeedbackLaw {
  const ValueFunction* value = nullptr;

  explicit FeedbackLaw(const ValueFunction& v) : value(&v) {}
  /// gamma(t_i, z(t_i, X)) for every column.
  Eigen::RowVectorXd controls(Index i, const Eigen::MatrixXd& x) const;
  double operator()(double t, const Eigen::VectorXd& x) const;
  ControlPolicy policy() const;
};

/// Realized costs of a policy on given increments: sum_i h w_i (L_x(t_i, X_i) + c(t_i, u_i)) + Phi(X_N),
/// with w_i = (1 + mu h)^{-(i+1)} and no terminal cost in discounted mode.
struct PolicyCosts {
  Eigen::VectorXd costs;
  Eigen::MatrixXd controls;  // N x samples
};

PolicyCosts policy_costs(const ControlProblem& problem, const Eigen::VectorXd& x0, double t0, double dt,
                         const Eigen::MatrixXd& increments, const ControlPolicy& policy);

struct ClosedLoopRun {
  Estimate cost;
  Eigen::VectorXd costs;
  double control_min = 0.0;
  double control_max = 0.0;
  bool controls_in_U = true;
};

ClosedLoopRun run_closed_loop(const FeedbackLaw& law, const Eigen::VectorXd& x0, Index samples,
                              std::uint64_t stream_offset = kValidationStreams);

struct HarnessEntry {
  std::string name;
  Estimate cost;
  double combined_half_width = 0.0;
  bool lower_bound_ok = true;
  std::vector<double> trace;  // piece values of open-loop controls
};

struct HarnessReport {
  Estimate value;
  std::vector<HarnessEntry> entries;  // entries[0] is the feedback
  bool lower_bound_pass = true;
  bool feedback_minimal = true;
  bool pass() const { return lower_bound_pass && feedback_minimal; }
};

/// J(u) >= v - 3 combined half-widths for the feedback, the constant extremes
/// and n_adversaries random piecewise-constant controls (common noise for all),
/// and J(feedback) no larger than any other tested cost.
HarnessReport optimality_harness(const FeedbackLaw& law, Index n_adversaries, std::uint64_t seed,
                                 Index samples = 0, Index pieces = 8);

struct QvReport {
  double relative_rms = 0.0;
  double mean_qv = 0.0;        // mean over paths of sum (v_{i+1} - v_i) dW_i
  double mean_integral = 0.0;  // mean over paths of sum z_i h
};

/// Discrete joint quadratic variation of v(t, X_t) with W against int z dr on fresh uncontrolled paths.
QvReport qv_identification_check(const ValueFunction& value, Index paths, std::uint64_t stream_offset = 2 * kValidationStreams);

struct MarkovReport {
  double rms = 0.0;
  double y_range = 0.0;
  double ratio = 0.0;
};

/// RMS of pathwise y_i - v(t_i, X_i) over a random fraction of (i, path) pairs of the training ensemble.
MarkovReport markov_identification(const ValueFunction& value, double fraction = 0.1, std::uint64_t seed = 5);

struct MildResidual {
  Estimate lhs;
  Estimate rhs;
  double residual = 0.0;
  double combined_half_width = 0.0;
  /// 3 combined half-widths, plus rounding slack for when both sides are exact (zero spread).
  bool pass() const { return residual <= 3.0 * combined_half_width + 1e-13 * (1.0 + std::abs(lhs.value)); }
};

/// Re-estimates the variation-of-constants right side with fresh paths:
///   finite:      E[Phi(X_N) + sum_i h Psi(t_i, X_i, z(t_i, X_i))]
///   discounted:  E[w_K v(t_K, X_K) + sum_{i<K} h w_i Psi(X_i, z(t_i, X_i))],  K = N/2.
MildResidual mild_residual(const ValueFunction& value, Index probes, std::uint64_t stream_offset = 3 * kValidationStreams);

/// Smallest C with |v| <= C (1 + |x|)^power over the sample.
double fit_growth_constant(const Eigen::VectorXd& norms, const Eigen::VectorXd& values, double power = 2.0);

}  // namespace halfline
