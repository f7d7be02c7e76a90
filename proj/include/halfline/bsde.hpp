#pragma once

// Backward equations solved by least-squares Monte Carlo on a recorded
// forward ensemble (explicit scheme, one regression per step):
//   z_i = E[y_{i+1} dW_i | X_i] / h
//   v_i = (E[y_{i+1} | X_i] + h Psi(t_i, X_i, z_i)) / (1 + mu h)      (mu = 0: finite horizon)
// Pathwise values follow the same step with the martingale part removed:
//   y_i = (y_{i+1} + h Psi_i - z_i dW_i) / (1 + mu h).

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "halfline/control_set.hpp"
#include "halfline/cost_model.hpp"
#include "halfline/dirichlet_heat.hpp"
#include "halfline/forward_sde.hpp"
#include "halfline/regression.hpp"
#include "halfline/stats.hpp"

namespace halfline {

/// Everything that defines a control problem. mu > 0 selects the discounted
/// infinite-horizon problem (the operator then normally carries the M shift).
struct ControlProblem {
  std::shared_ptr<const Operator> op;
  Nonlinearity f = Nonlinearity::zero();
  CostSpec cost;
  ControlSet controls;
  double horizon = 1.0;
  double mu = 0.0;
  BoundaryQuadrature boundary = BoundaryQuadrature::StepAverage;

  bool stationary() const { return mu > 0.0; }
  const Grid& grid() const { return op->grid(); }
  void validate() const;
};

struct McConfig {
  Index n_steps = 200;           // time steps on [t, T] (finite horizon)
  double stationary_dt = 0.02;   // time step of the truncated discounted problem
  Index samples = 10000;
  std::uint64_t seed = 1;
  BasisConfig basis;
  double truncation_tol = 1e-4;  // (M/mu) decay bound that fixes the truncation horizon
  bool rate_diagnostic = true;   // also solve on [0, 2n]

  void validate() const;
};

/// First-variation request: the tangent starts at (l - A)^alpha k.
struct TangentRequest {
  double alpha = 0.0;
  Eigen::VectorXd k;
};

/// What the backward sweep needs from a forward ensemble, without the states.
struct ForwardRecord {
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<Eigen::MatrixXd> features;  // i = 0..N, d x samples
  Eigen::MatrixXd state_cost;             // (N+1) x samples, state part of L at t_i
  Eigen::RowVectorXd terminal;            // Phi(X_N)
  Eigen::MatrixXd increments;             // N x samples

  // filled when a tangent was requested
  std::vector<Eigen::MatrixXd> tangent_features;
  Eigen::MatrixXd tangent_state_cost;  // grad_x L(t_i, X_i) D_i
  Eigen::RowVectorXd tangent_terminal;  // grad Phi(X_N) D_N

  Index n_steps() const { return increments.rows(); }
  Index samples() const { return increments.cols(); }
  double time(Index i) const { return t0 + dt * double(i); }
  bool has_tangent() const { return !tangent_features.empty(); }
};

ForwardRecord record_forward(const ControlProblem& problem, const FeatureMap& features, const Eigen::VectorXd& x0,
                             double t0, double dt, const Eigen::MatrixXd& increments,
                             const TangentRequest* tangent = nullptr);

enum class BsdeMode { FiniteHorizon, DiscountedTruncated };

struct BsdeSolution {
  BsdeMode mode = BsdeMode::FiniteHorizon;
  double t0 = 0.0;
  double dt = 0.0;
  double mu = 0.0;
  double n_truncation = 0.0;  // horizon of the truncated problem

  Eigen::MatrixXd y_values;  // (N+1) x samples, pathwise
  Eigen::MatrixXd v_values;  // (N+1) x samples, regression estimate v(t_i, X_i)
  Eigen::MatrixXd z_values;  // N x samples
  std::vector<LinearModel> continuation;  // E[y_{i+1} | X_i = x]
  std::vector<LinearModel> z_model;       // z(t_i, x)
  std::vector<double> condition;          // worst Gram condition per step

  double y0 = 0.0;
  double half_width = 0.0;

  // discounted mode: |y0(n) - y0(2n)| and its admissible size
  double rate_diagnostic = std::numeric_limits<double>::quiet_NaN();
  double rate_bound = std::numeric_limits<double>::quiet_NaN();
  bool rate_warning = false;

  Index n_steps() const { return z_values.rows(); }
  Index samples() const { return y_values.cols(); }
  double time(Index i) const { return t0 + dt * double(i); }
  double discount() const { return 1.0 + mu * dt; }
};

/// Psi(t, z) - state cost, i.e. inf_u { z u + control_cost(t, u) }, for each z; gamma optional.
Eigen::VectorXd hamiltonian_batch(const ControlProblem& problem, double t, const Eigen::VectorXd& z,
                                  Eigen::VectorXd* gamma = nullptr);

/// Backward sweep on a record. mu = 0 gives the finite-horizon problem with
/// y_N = Phi(X_N); mu > 0 the truncated discounted one with y_N = 0.
BsdeSolution solve_bsde(const ForwardRecord& record, const ControlProblem& problem, const BasisConfig& basis,
                        double mu = 0.0);

BsdeSolution solve_bsde_finite(const ForwardRecord& record, const ControlProblem& problem, const BasisConfig& basis);

/// sup_x |Psi(x, 0)| of a time-homogeneous problem.
double psi_bound(const ControlProblem& problem);

/// Smallest horizon on the step grid with (M/mu)(1 + mu h)^{-n/h} < tol.
double truncation_horizon(double m_psi, double mu, double tol, double dt);

/// Discounted problem truncated at `horizon`, from x0, with a fresh ensemble.
BsdeSolution solve_bsde_truncated(const ControlProblem& problem, const Eigen::VectorXd& x0, double horizon,
                                  const McConfig& mc, std::uint64_t stream_offset = 0);

/// Truncation horizon chosen from tol; with mc.rate_diagnostic the problem is
/// re-solved on twice the horizon (common noise) and |y0(n) - y0(2n)| recorded.
BsdeSolution solve_bsde_discounted(const ControlProblem& problem, const Eigen::VectorXd& x0, const McConfig& mc,
                                   std::uint64_t stream_offset = 0);

struct DerivativeSolution {
  Eigen::MatrixXd p_values;  // (N+1) x samples, pathwise
  Eigen::MatrixXd q_values;  // N x samples
  double p0 = 0.0;
  double half_width = 0.0;
};

/// Linear BSDE for P^alpha k along the record (which must carry the tangent):
///   P_N = grad Phi D_N,  P_i = E[P_{i+1}|.] + h (grad_x L D_i + gamma(t_i, z_i) Q_i).
/// P_0 estimates [grad v (l - A)^alpha](t, x) k.
DerivativeSolution solve_derivative_bsde(const ForwardRecord& record, const BsdeSolution& bsde,
                                         const ControlProblem& problem, const BasisConfig& basis);

Estimate evaluate_value(const BsdeSolution& bsde);

/// Per-step diagnostics rows: t, mean_y, sd_y, mean_z, sd_z, regression_condition.
Eigen::MatrixXd bsde_diagnostics(const BsdeSolution& bsde);

}  // namespace halfline
