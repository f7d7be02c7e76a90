#include "halfline/bsde.hpp"

#include <cmath>
#include <sstream>

#include "halfline/errors.hpp"

namespace halfline {

void ControlProblem::validate() const {
  if (!op) throw InvalidArgument("problem: operator missing");
  controls.validate();
  if (!(mu >= 0.0)) throw InvalidArgument("problem: mu must be non-negative");
  if (!stationary() && !(horizon > 0.0)) throw InvalidArgument("problem: horizon must be positive");
}

void McConfig::validate() const {
  if (n_steps < 1) throw InvalidArgument("mc: n_steps must be positive");
  if (!(stationary_dt > 0.0)) throw InvalidArgument("mc: stationary_dt must be positive");
  if (samples < 1000) throw InvalidArgument("mc: the backward solver needs at least 1000 samples");
  if (!(truncation_tol > 0.0)) throw InvalidArgument("mc: truncation_tol must be positive");
  basis.validate();
}

ForwardRecord record_forward(const ControlProblem& problem, const FeatureMap& features, const Eigen::VectorXd& x0,
                             double t0, double dt, const Eigen::MatrixXd& increments, const TangentRequest* tangent) {
  problem.validate();
  const Operator& op = *problem.op;
  if (x0.size() != op.size()) throw InvalidArgument("record_forward: x0 length does not match grid");
  const Index steps = increments.rows();
  const Index samples = increments.cols();
  if (steps < 1) throw InvalidArgument("record_forward: need at least one step");

  ForwardRecord rec;
  rec.t0 = t0;
  rec.dt = dt;
  rec.increments = increments;
  rec.features.resize(std::size_t(steps + 1));
  rec.state_cost.resize(steps + 1, samples);
  rec.terminal = Eigen::RowVectorXd::Zero(samples);

  Eigen::MatrixXd d;
  if (tangent) {
    if (tangent->k.size() != op.size()) throw InvalidArgument("record_forward: tangent direction length mismatch");
    d = op.fractional_apply(tangent->alpha, tangent->k).replicate(1, samples);
    rec.tangent_features.resize(std::size_t(steps + 1));
    rec.tangent_state_cost.resize(steps + 1, samples);
    rec.tangent_terminal = Eigen::RowVectorXd::Zero(samples);
  }

  ForwardStepper stepper(op, problem.f, dt, problem.boundary);
  const Grid& grid = op.grid();
  StepObserver observer = [&](Index i, double t, const Eigen::MatrixXd& x) {
    rec.features[std::size_t(i)] = features(x);
    rec.state_cost.row(i) = state_cost(problem.cost, grid, t, x);
    if (i == steps) rec.terminal = terminal_cost(problem.cost, grid, x);
    if (tangent) {
      rec.tangent_features[std::size_t(i)] = features(d);
      rec.tangent_state_cost.row(i) = state_cost_derivative(problem.cost, grid, t, x, d);
      if (i == steps)
        rec.tangent_terminal = terminal_cost_derivative(problem.cost, grid, x, d);
      else
        stepper.advance_tangent(t, x, d);
    }
  };
  simulate_ensemble(stepper, x0, t0, increments, {}, observer, false, nullptr);
  return rec;
}

Eigen::VectorXd hamiltonian_batch(const ControlProblem& problem, double t, const Eigen::VectorXd& z,
                                  Eigen::VectorXd* gamma) {
  Eigen::VectorXd psi(z.size());
  if (gamma) gamma->resize(z.size());
  for (Index p = 0; p < z.size(); ++p) {
    const HamiltonianValue h = minimize_control(problem.cost, problem.controls, t, z[p]);
    psi[p] = h.psi;
    if (gamma) (*gamma)[p] = h.gamma_u;
  }
  return psi;
}

namespace {

double standard_error(const Eigen::VectorXd& x) { return mean_estimate(x).half_width; }

}  // namespace

BsdeSolution solve_bsde(const ForwardRecord& record, const ControlProblem& problem, const BasisConfig& basis,
                        double mu) {
  if (!(mu >= 0.0)) throw InvalidArgument("solve_bsde: mu must be non-negative");
  const Index steps = record.n_steps();
  const Index samples = record.samples();
  if (steps < 1) throw InvalidArgument("solve_bsde: empty record");
  const double h = record.dt;

  BsdeSolution sol;
  sol.mode = mu > 0.0 ? BsdeMode::DiscountedTruncated : BsdeMode::FiniteHorizon;
  sol.t0 = record.t0;
  sol.dt = h;
  sol.mu = mu;
  sol.n_truncation = h * double(steps);
  const double disc = sol.discount();

  // time-major columns; transposed into the per-step rows at the end
  Eigen::MatrixXd y(samples, steps + 1), v(samples, steps + 1), z(samples, steps);
  if (mu > 0.0) {
    y.col(steps).setZero();
  } else {
    y.col(steps) = record.terminal.transpose();
  }
  v.col(steps) = y.col(steps);
  sol.continuation.resize(std::size_t(steps));
  sol.z_model.resize(std::size_t(steps));
  sol.condition.assign(std::size_t(steps), 1.0);

  for (Index i = steps - 1; i >= 0; --i) {
    const Eigen::MatrixXd& feats = record.features[std::size_t(i)];
    const Eigen::VectorXd dw = record.increments.row(i).transpose();
    const Eigen::VectorXd next = y.col(i + 1);

    // E[y dW | X] = E[(y - E[y | X]) dW | X]; centering removes the level of y
    // from the target, which otherwise dominates its variance and leaks into z dW.
    LinearModel cm = LinearModel::fit(feats, next, basis);
    const Eigen::VectorXd cont = cm.predict(feats);
    LinearModel zm = LinearModel::fit(feats, (next - cont).cwiseProduct(dw) / h, basis);
    const Eigen::VectorXd zi = zm.predict(feats);
    const Eigen::VectorXd psi =
        record.state_cost.row(i).transpose() + hamiltonian_batch(problem, record.time(i), zi);

    z.col(i) = zi;
    v.col(i) = (cont + h * psi) / disc;
    y.col(i) = (next + h * psi - zi.cwiseProduct(dw)) / disc;
    sol.condition[std::size_t(i)] = std::max(zm.condition(), cm.condition());
    sol.continuation[std::size_t(i)] = std::move(cm);
    sol.z_model[std::size_t(i)] = std::move(zm);
  }

  sol.y0 = mean(v.col(0));
  sol.half_width = standard_error(y.col(1)) / disc;
  sol.y_values = y.transpose();
  sol.v_values = v.transpose();
  sol.z_values = z.transpose();
  return sol;
}

BsdeSolution solve_bsde_finite(const ForwardRecord& record, const ControlProblem& problem, const BasisConfig& basis) {
  return solve_bsde(record, problem, basis, 0.0);
}

double psi_bound(const ControlProblem& problem) {
  return hamiltonian_bound(problem.cost, problem.controls, 0.0);
}

double truncation_horizon(double m_psi, double mu, double tol, double dt) {
  if (!(mu > 0.0) || !(tol > 0.0) || !(dt > 0.0)) throw InvalidArgument("truncation_horizon: mu, tol, dt must be positive");
  if (!std::isfinite(m_psi)) throw InvalidArgument("truncation_horizon: sup |Psi(., 0)| is infinite");
  if (m_psi / mu < tol) return dt;
  const double steps = std::ceil(std::log(m_psi / (mu * tol)) / std::log1p(mu * dt));
  return dt * std::max(1.0, steps);
}

BsdeSolution solve_bsde_truncated(const ControlProblem& problem, const Eigen::VectorXd& x0, double horizon,
                                  const McConfig& mc, std::uint64_t stream_offset) {
  problem.validate();
  mc.validate();
  if (!problem.stationary()) throw InvalidArgument("solve_bsde_truncated: problem has no discount rate");
  if (!(horizon > 0.0)) throw InvalidArgument("solve_bsde_truncated: horizon must be positive");
  const double dt = mc.stationary_dt;
  const Index steps = std::max<Index>(1, Index(std::llround(horizon / dt)));
  const FeatureMap features(*problem.op, mc.basis);
  const Eigen::MatrixXd dw = sample_increments(steps, dt, mc.samples, mc.seed, stream_offset);
  const ForwardRecord rec = record_forward(problem, features, x0, 0.0, dt, dw);
  return solve_bsde(rec, problem, mc.basis, problem.mu);
}

BsdeSolution solve_bsde_discounted(const ControlProblem& problem, const Eigen::VectorXd& x0, const McConfig& mc,
                                   std::uint64_t stream_offset) {
  problem.validate();
  if (!problem.stationary()) throw InvalidArgument("solve_bsde_discounted: mu must be positive");
  const double m = psi_bound(problem);
  if (!std::isfinite(m))
    throw InvalidArgument("solve_bsde_discounted: sup |Psi(., 0)| is infinite (use a bounded state cost)");
  const double n = truncation_horizon(m, problem.mu, mc.truncation_tol, mc.stationary_dt);
  BsdeSolution sol = solve_bsde_truncated(problem, x0, n, mc, stream_offset);
  if (mc.rate_diagnostic) {
    const BsdeSolution twice = solve_bsde_truncated(problem, x0, 2.0 * n, mc, stream_offset);
    sol.rate_diagnostic = std::abs(sol.y0 - twice.y0);
    sol.rate_bound = 3.0 * (m / problem.mu) * std::exp(-problem.mu * n) +
                     3.0 * combined_half_width(sol.half_width, twice.half_width);
    sol.rate_warning = sol.rate_diagnostic > sol.rate_bound;
  }
  return sol;
}

DerivativeSolution solve_derivative_bsde(const ForwardRecord& record, const BsdeSolution& bsde,
                                         const ControlProblem& problem, const BasisConfig& basis) {
  if (!record.has_tangent()) throw InvalidArgument("solve_derivative_bsde: record carries no tangent process");
  if (bsde.mode != BsdeMode::FiniteHorizon) throw InvalidArgument("solve_derivative_bsde: finite horizon only");
  const Index steps = record.n_steps();
  const Index samples = record.samples();
  if (bsde.n_steps() != steps || bsde.samples() != samples)
    throw InvalidArgument("solve_derivative_bsde: solution and record do not match");
  const double h = record.dt;

  Eigen::MatrixXd p(samples, steps + 1), q(samples, steps);
  p.col(steps) = record.tangent_terminal.transpose();
  Eigen::VectorXd gamma;
  double first_mean = 0.0;
  for (Index i = steps - 1; i >= 0; --i) {
    const std::size_t si = std::size_t(i);
    Eigen::MatrixXd feats(record.features[si].rows() + record.tangent_features[si].rows(), samples);
    feats << record.features[si], record.tangent_features[si];
    const Eigen::VectorXd dw = record.increments.row(i).transpose();
    const Eigen::VectorXd next = p.col(i + 1);

    const Eigen::VectorXd cont = LinearModel::fit(feats, next, basis).predict(feats);
    const Eigen::VectorXd qi = LinearModel::fit(feats, (next - cont).cwiseProduct(dw) / h, basis).predict(feats);
    hamiltonian_batch(problem, record.time(i), bsde.z_values.row(i).transpose(), &gamma);
    const Eigen::VectorXd driver = record.tangent_state_cost.row(i).transpose() + gamma.cwiseProduct(qi);

    q.col(i) = qi;
    p.col(i) = next + h * driver - qi.cwiseProduct(dw);
    if (i == 0) first_mean = mean(cont + h * driver);
  }
  DerivativeSolution out;
  out.p0 = first_mean;
  out.half_width = standard_error(p.col(1));
  out.p_values = p.transpose();
  out.q_values = q.transpose();
  return out;
}

Estimate evaluate_value(const BsdeSolution& bsde) { return {bsde.y0, bsde.half_width}; }

Eigen::MatrixXd bsde_diagnostics(const BsdeSolution& bsde) {
  const Index steps = bsde.n_steps();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  Eigen::MatrixXd rows(steps + 1, 6);
  for (Index i = 0; i <= steps; ++i) {
    const Eigen::VectorXd y = bsde.y_values.row(i).transpose();
    rows(i, 0) = bsde.time(i);
    rows(i, 1) = mean(y);
    rows(i, 2) = std::sqrt(sample_variance(y));
    if (i < steps) {
      const Eigen::VectorXd z = bsde.z_values.row(i).transpose();
      rows(i, 3) = mean(z);
      rows(i, 4) = std::sqrt(sample_variance(z));
      rows(i, 5) = bsde.condition[std::size_t(i)];
    } else {
      rows(i, 3) = rows(i, 4) = rows(i, 5) = nan;
    }
  }
  return rows;
}

}  // namespace halfline
