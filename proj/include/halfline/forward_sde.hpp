#pragma once

// Forward state equation in mild form:
//   X_s = e^{(s-t)A} x + int e^{(s-r)A} F(r, X_r) dr + int e^{(s-r)A} B (u_r dr + dW_r)
// solved on a uniform time grid, one path at a time or as a batched ensemble
// (one column per sample), with the first-variation processes.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "halfline/control_set.hpp"
#include "halfline/dirichlet_heat.hpp"

namespace halfline {

/// Pointwise nonlinearity F(t, X)(xi) = f(t, X(xi)) with |f(t,0)| + |df/dy| <= c_f.
struct Nonlinearity {
  std::string name = "zero";
  std::function<double(double, double)> f;
  std::function<double(double, double)> df;
  /// Optional whole-matrix versions of f and df (same values, vectorized).
  std::function<Eigen::MatrixXd(double, const Eigen::MatrixXd&)> batch_f;
  std::function<Eigen::MatrixXd(double, const Eigen::MatrixXd&)> batch_df;
  double c_f = 0.0;

  bool is_zero() const { return !f; }
  Eigen::MatrixXd eval(double t, const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd eval_derivative(double t, const Eigen::MatrixXd& x) const;

  static Nonlinearity zero();
  static Nonlinearity linear(double c);
  static Nonlinearity tanh(double amplitude);
};

struct NonlinearityCheck {
  double max_f_at_zero = 0.0;
  double max_slope = 0.0;
  bool within_bound = true;
};

/// Spot-check |f(t,0)| <= c_f and |f(t,r1) - f(t,r2)| <= c_f |r1 - r2| on random samples.
NonlinearityCheck check_nonlinearity(const Nonlinearity& f, long samples, std::uint64_t seed, double horizon = 1.0);

struct WienerPath {
  double t0 = 0.0;
  double dt = 0.0;
  Eigen::VectorXd increments;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  Index n_steps() const { return increments.size(); }
  double horizon() const { return t0 + dt * double(n_steps()); }
  double time(Index i) const { return t0 + dt * double(i); }
};

WienerPath sample_wiener(Index n_steps, double horizon, std::uint64_t seed, std::uint64_t stream, double t0 = 0.0);

/// Increments for `samples` paths (n_steps x samples); column p equals
/// sample_wiener(..., seed, first_stream + p).increments.
Eigen::MatrixXd sample_increments(Index n_steps, double dt, Index samples, std::uint64_t seed,
                                  std::uint64_t first_stream = 0);

enum class ConvolutionMethod { DirectQuadrature, Factorization };

/// Exponents of the factorization W_A = (sin pi g / pi) int e^{(s-r)A}(s-r)^{g-1}(l-A)^{1-b} Yhat_r dr.
/// Admissible when alpha + 1 - beta + 1/p < gamma < 1/2 and 1/2 < beta < 1/2 + theta/4.
struct FactorizationParams {
  double gamma = 0.45;
  double beta = -1.0;  // negative: 1/2 + theta/8
  double p = 100.0;
  double alpha = 0.0;

  FactorizationParams resolved(double theta) const;
};

/// Stochastic convolution W_A(t_i), i = 0..N, of one path.
std::vector<Eigen::VectorXd> stochastic_convolution(const Operator& op, const WienerPath& wiener,
                                                    ConvolutionMethod method, FactorizationParams params = {});

/// W_A at the final time for a batch of increment columns (n_steps x samples); returns n x samples.
Eigen::MatrixXd stochastic_convolution_terminal(const Operator& op, const Eigen::MatrixXd& increments, double dt,
                                                ConvolutionMethod method, FactorizationParams params = {});

enum class ForwardScheme { ExponentialEuler, PicardFixedPoint };

/// How one step's boundary forcing is integrated against the semigroup.
/// StepAverage: (1/h) int_0^h e^{rA}B dr (exact for piecewise-constant data).
/// Midpoint: e^{(h/2)A}B.
enum class BoundaryQuadrature { StepAverage, Midpoint };

struct ForwardOptions {
  ForwardScheme scheme = ForwardScheme::ExponentialEuler;
  BoundaryQuadrature boundary = BoundaryQuadrature::StepAverage;
  double tol = 1e-12;
  Index max_iter = 100;
};

/// One exponential-Euler step for a node-by-sample state matrix:
///   X <- e^{hA}(X + h F(t, X)) + b (u h + dW).
class ForwardStepper {
 public:
  ForwardStepper(const Operator& op, Nonlinearity f, double dt,
                 BoundaryQuadrature boundary = BoundaryQuadrature::StepAverage);

  const Operator& op() const { return *op_; }
  const Nonlinearity& nonlinearity() const { return f_; }
  double dt() const { return dt_; }
  const Eigen::MatrixXd& propagator() const { return propagator_; }
  const Eigen::VectorXd& boundary_vector() const { return boundary_; }

  /// X + h F(t, X), the argument of the propagator.
  Eigen::MatrixXd drift_argument(double t, const Eigen::MatrixXd& x) const;

  /// drive = u h + dW per sample.
  void advance(double t, Eigen::MatrixXd& x, const Eigen::Ref<const Eigen::RowVectorXd>& drive) const;

  /// First variation along the pre-step state x: D <- e^{hA}(D + h f'(t, x) D).
  void advance_tangent(double t, const Eigen::MatrixXd& x, Eigen::MatrixXd& d) const;

 private:
  const Operator* op_;
  Nonlinearity f_;
  double dt_;
  Eigen::MatrixXd propagator_;
  Eigen::VectorXd boundary_;
};

/// Writes the control of every sample at step i given the states X_{t_i}.
using ControlPolicy =
    std::function<void(Index step, double t, const Eigen::MatrixXd& x, Eigen::Ref<Eigen::RowVectorXd> u)>;
/// Sees X_{t_i} for i = 0..N (before the step taken from t_i).
using StepObserver = std::function<void(Index step, double t, const Eigen::MatrixXd& x)>;

struct ForwardEnsemble {
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<Eigen::MatrixXd> states;  // per time index, n x samples (empty unless stored)
  Eigen::MatrixXd final_state;
  Eigen::MatrixXd increments;  // n_steps x samples
  Eigen::MatrixXd controls;    // n_steps x samples, empty when uncontrolled
  std::vector<double> picard_distances;
  std::vector<double> picard_ratios;

  Index n_steps() const { return increments.rows(); }
  Index samples() const { return increments.cols(); }
  double time(Index i) const { return t0 + dt * double(i); }
  Eigen::VectorXd state(Index i, Index sample = 0) const { return states.at(std::size_t(i)).col(sample); }
};

/// Batched exponential-Euler ensemble. Controls, when a policy is given, are
/// checked against `bounds`.
ForwardEnsemble simulate_ensemble(const ForwardStepper& stepper, const Eigen::VectorXd& x0, double t0,
                                  const Eigen::MatrixXd& increments, const ControlPolicy& policy = {},
                                  const StepObserver& observer = {}, bool store_states = false,
                                  const ControlSet* bounds = nullptr);

/// Single-path solve storing the whole trajectory. `control` holds one value
/// per step (empty: uncontrolled).
ForwardEnsemble solve_forward(const Operator& op, const Nonlinearity& f, const Eigen::VectorXd& x0,
                              const WienerPath& wiener, std::span<const double> control = {},
                              const ControlSet* bounds = nullptr, ForwardOptions options = {});

/// grad_x X_s h along a stored single-path solve.
std::vector<Eigen::VectorXd> variational_derivative(const Operator& op, const Nonlinearity& f,
                                                    const ForwardEnsemble& base, const Eigen::VectorXd& h,
                                                    BoundaryQuadrature boundary = BoundaryQuadrature::StepAverage);

/// Theta^alpha(s) k = int e^{(s-r)A} grad F (Theta^alpha(r) k + (l-A)^alpha e^{(r-t)A} k) dr.
std::vector<Eigen::VectorXd> theta_process(const Operator& op, const Nonlinearity& f, const ForwardEnsemble& base,
                                           double alpha, const Eigen::VectorXd& k);

}  // namespace halfline
