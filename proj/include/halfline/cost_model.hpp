#pragma once

// Running/terminal costs, the Hamiltonian Psi(s,x,z) = inf_u { z u + L(s,x,u) }
// and its deterministic selection gamma.
//
// The running density is additively separable,
//   ell(s, xi, y, u) = state_density(s, xi, y) + control_cost(s, u) eta(xi),  int eta = 1,
// so L(s, x, u) = sum_i state_density(s, xi_i, x_i) w_i + control_cost(s, u) and the
// minimization over U depends on (s, z) only.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <string>

#include "halfline/control_set.hpp"
#include "halfline/dirichlet_heat.hpp"

namespace halfline {

/// Constants of the Lipschitz-growth condition
/// |g(y1) - g(y2)| <= C1 sqrt(rho)/(1+xi)^{1/2+eps} |y1-y2| + C2 rho (|y1|+|y2|) |y1-y2|.
struct GrowthConstants {
  double c1 = 0.0;
  double c2 = 0.0;
  double eps = 0.1;
};

struct CostSpec {
  std::string name = "zero";
  std::function<double(double s, double xi, double y)> state_density;
  std::function<double(double s, double xi, double y)> state_density_dy;
  std::function<double(double xi, double y)> terminal_density;
  std::function<double(double xi, double y)> terminal_density_dy;
  std::function<double(double s, double u)> control_cost;
  /// Densities vanish for xi > support.
  double support = std::numeric_limits<double>::infinity();
  /// Range of the state part of L over all states (infinite when unbounded).
  double state_cost_min = 0.0;
  double state_cost_max = 0.0;
  GrowthConstants growth;
};

struct HamiltonianValue {
  double psi = 0.0;
  double gamma_u = 0.0;
};

/// sum_i state_density(s, xi_i, x_i) w_i, column-wise for an ensemble.
Eigen::RowVectorXd state_cost(const CostSpec& spec, const Grid& grid, double s, const Eigen::MatrixXd& x);
/// grad_x of the state part of L applied to d, column-wise.
Eigen::RowVectorXd state_cost_derivative(const CostSpec& spec, const Grid& grid, double s, const Eigen::MatrixXd& x,
                                         const Eigen::MatrixXd& d);
Eigen::RowVectorXd terminal_cost(const CostSpec& spec, const Grid& grid, const Eigen::MatrixXd& x);
Eigen::RowVectorXd terminal_cost_derivative(const CostSpec& spec, const Grid& grid, const Eigen::MatrixXd& x,
                                            const Eigen::MatrixXd& d);
/// Row vector r with r . x = grad Phi(x) x (per-node derivative times quadrature weight).
Eigen::VectorXd terminal_gradient(const CostSpec& spec, const Grid& grid, const Eigen::VectorXd& x);

double running_cost_L(const CostSpec& spec, const Grid& grid, const ControlSet& controls, double s,
                      const Eigen::VectorXd& x, double u);
double terminal_cost_Phi(const CostSpec& spec, const Grid& grid, const Eigen::VectorXd& x);

/// inf_u { z u + control_cost(s, u) } and its selected minimizer.
HamiltonianValue minimize_control(const CostSpec& spec, const ControlSet& controls, double s, double z);

HamiltonianValue hamiltonian(const CostSpec& spec, const Grid& grid, const ControlSet& controls, double s,
                             const Eigen::VectorXd& x, double z);

/// sup_x |Psi(s, x, 0)|, from the state-cost range (infinite for unbounded costs).
double hamiltonian_bound(const CostSpec& spec, const ControlSet& controls, double s = 0.0);

struct LipschitzReport {
  double fitted_constant = 0.0;
  double bound = 0.0;
  bool pass = true;
};

/// Empirical Lipschitz constant of z -> Psi(s,x,z) against C_U = sup |u|.
LipschitzReport lipschitz_in_z_check(const CostSpec& spec, const Grid& grid, const ControlSet& controls,
                                     long samples, std::uint64_t seed = 7, double tol = 1e-6);

struct GrowthReport {
  double worst_ratio = 0.0;  // max observed |dg| / growth bound
  bool pass = true;
};

/// Spot-check of the Lipschitz-growth condition for the state and terminal densities.
GrowthReport check_growth(const CostSpec& spec, const Grid& grid, long samples, std::uint64_t seed = 11);

/// Named costs. Parameters not listed in `params` keep their defaults; unknown
/// names or parameters raise InvalidArgument.
///   zero
///   constant            c                 L = c, Phi = 0
///   quadratic_tracking  q r target window terminal_q cap
///       state density q rho 1{xi<=window} (y-target)^2 (saturated to cap*tanh(./cap) when cap>0),
///       terminal density terminal_q rho 1{xi<=window} (y-target)^2, control cost r u^2
///   spectral_terminal   mode scale        Phi(x) = scale <x, e_mode>, no running cost
CostSpec make_cost(const std::string& name, const std::map<std::string, double>& params, const Operator& op);

}  // namespace halfline
