#include "halfline/hjb_control.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "halfline/errors.hpp"
#include "halfline/random.hpp"

namespace halfline {

namespace {

BsdeSolution solve_value(const ControlProblem& problem, const McConfig& mc, const FeatureMap& features,
                         const Eigen::VectorXd& x0, double t0, std::uint64_t stream_offset) {
  problem.validate();
  mc.validate();
  if (problem.stationary()) {
    if (t0 != 0.0) throw InvalidArgument("value function: discounted problems start at t = 0");
    return solve_bsde_discounted(problem, x0, mc, stream_offset);
  }
  if (!(t0 < problem.horizon)) throw InvalidArgument("value function: t must lie before the horizon");
  const double dt = (problem.horizon - t0) / double(mc.n_steps);
  const Eigen::MatrixXd dw = sample_increments(mc.n_steps, dt, mc.samples, mc.seed, stream_offset);
  const ForwardRecord rec = record_forward(problem, features, x0, t0, dt, dw);
  return solve_bsde_finite(rec, problem, mc.basis);
}

double control_part(const CostSpec& spec, double t, double u) { return spec.control_cost ? spec.control_cost(t, u) : 0.0; }

}  // namespace

ValueFunction::ValueFunction(ControlProblem problem, McConfig mc, Eigen::VectorXd x0, double t0,
                             std::uint64_t stream_offset)
    : problem_(std::move(problem)),
      mc_(std::move(mc)),
      x0_(std::move(x0)),
      features_((problem_.validate(), *problem_.op), mc_.basis),
      solution_(solve_value(problem_, mc_, features_, x0_, t0, stream_offset)) {}

Index ValueFunction::step_at(double t) const {
  const double s = (t - solution_.t0) / solution_.dt;
  const Index i = Index(std::floor(s + 1e-9));
  return std::clamp<Index>(i, 0, n_steps() - 1);
}

Eigen::VectorXd ValueFunction::z_hat(Index i, const Eigen::MatrixXd& x) const {
  if (i < 0 || i >= n_steps()) throw InvalidArgument("z_hat: step outside the time grid");
  return solution_.z_model[std::size_t(i)].predict(features_(x));
}

Eigen::VectorXd ValueFunction::v_hat(Index i, const Eigen::MatrixXd& x) const {
  if (i < 0 || i > n_steps()) throw InvalidArgument("v_hat: step outside the time grid");
  if (i == n_steps()) {
    if (problem_.stationary()) return Eigen::VectorXd::Zero(x.cols());
    return terminal_cost(problem_.cost, problem_.grid(), x).transpose();
  }
  const Eigen::MatrixXd f = features_(x);
  const Eigen::VectorXd z = solution_.z_model[std::size_t(i)].predict(f);
  const Eigen::VectorXd cont = solution_.continuation[std::size_t(i)].predict(f);
  const double t = time(i);
  const Eigen::VectorXd psi =
      state_cost(problem_.cost, problem_.grid(), t, x).transpose() + hamiltonian_batch(problem_, t, z);
  return (cont + dt() * psi) / solution_.discount();
}

Estimate value(const ControlProblem& problem, const McConfig& mc, double t, const Eigen::VectorXd& x) {
  return ValueFunction(problem, mc, x, t).value();
}

Eigen::RowVectorXd FeedbackLaw::controls(Index i, const Eigen::MatrixXd& x) const {
  Eigen::VectorXd gamma;
  hamiltonian_batch(value->problem(), value->time(i), value->z_hat(i, x), &gamma);
  return gamma.transpose();
}

double FeedbackLaw::operator()(double t, const Eigen::VectorXd& x) const {
  return controls(value->step_at(t), x)[0];
}

ControlPolicy FeedbackLaw::policy() const {
  return [law = *this](Index i, double, const Eigen::MatrixXd& x, Eigen::Ref<Eigen::RowVectorXd> u) {
    u = law.controls(i, x);
  };
}

PolicyCosts policy_costs(const ControlProblem& problem, const Eigen::VectorXd& x0, double t0, double dt,
                         const Eigen::MatrixXd& increments, const ControlPolicy& policy) {
  problem.validate();
  const Index steps = increments.rows();
  const Index samples = increments.cols();
  const double disc = 1.0 + problem.mu * dt;
  const Grid& grid = problem.grid();

  Eigen::VectorXd costs = Eigen::VectorXd::Zero(samples);
  Eigen::MatrixXd state_rows(steps, samples);
  ForwardStepper stepper(*problem.op, problem.f, dt, problem.boundary);
  StepObserver observer = [&](Index i, double t, const Eigen::MatrixXd& x) {
    if (i < steps) {
      state_rows.row(i) = state_cost(problem.cost, grid, t, x);
    } else if (!problem.stationary()) {
      costs += terminal_cost(problem.cost, grid, x).transpose();
    }
  };
  ForwardEnsemble ens = simulate_ensemble(stepper, x0, t0, increments, policy, observer, false, &problem.controls);

  double weight = 1.0;
  for (Index i = 0; i < steps; ++i) {
    weight /= disc;
    const double t = t0 + dt * double(i);
    for (Index p = 0; p < samples; ++p)
      costs[p] += dt * weight * (state_rows(i, p) + control_part(problem.cost, t, ens.controls(i, p)));
  }
  return {costs, std::move(ens.controls)};
}

ClosedLoopRun run_closed_loop(const FeedbackLaw& law, const Eigen::VectorXd& x0, Index samples,
                              std::uint64_t stream_offset) {
  const ValueFunction& vf = *law.value;
  const Eigen::MatrixXd dw = sample_increments(vf.n_steps(), vf.dt(), samples, vf.mc().seed, stream_offset);
  PolicyCosts pc = policy_costs(vf.problem(), x0, vf.time(0), vf.dt(), dw, law.policy());
  ClosedLoopRun run;
  run.cost = mean_estimate(pc.costs);
  run.costs = std::move(pc.costs);
  run.control_min = pc.controls.minCoeff();
  run.control_max = pc.controls.maxCoeff();
  run.controls_in_U = vf.problem().controls.contains(run.control_min) && vf.problem().controls.contains(run.control_max);
  if (!std::isfinite(run.cost.value)) throw NumericalFailure("run_closed_loop: non-finite cost");
  return run;
}

HarnessReport optimality_harness(const FeedbackLaw& law, Index n_adversaries, std::uint64_t seed, Index samples,
                                 Index pieces) {
  const ValueFunction& vf = *law.value;
  const ControlProblem& problem = vf.problem();
  if (samples <= 0) samples = vf.mc().samples;
  if (pieces < 1) throw InvalidArgument("optimality_harness: need at least one piece");
  const Index steps = vf.n_steps();
  const Eigen::MatrixXd dw = sample_increments(steps, vf.dt(), samples, vf.mc().seed, kValidationStreams);

  HarnessReport report;
  report.value = vf.value();
  auto record = [&](std::string name, const ControlPolicy& policy, std::vector<double> trace) {
    const PolicyCosts pc = policy_costs(problem, vf.x0(), vf.time(0), vf.dt(), dw, policy);
    HarnessEntry e;
    e.name = std::move(name);
    e.cost = mean_estimate(pc.costs);
    e.combined_half_width = combined_half_width(e.cost.half_width, report.value.half_width);
    e.lower_bound_ok = e.cost.value >= report.value.value - 3.0 * e.combined_half_width;
    e.trace = std::move(trace);
    report.entries.push_back(std::move(e));
  };
  auto piecewise = [steps, pieces](std::vector<double> values) {
    return [steps, pieces, values](Index i, double, const Eigen::MatrixXd&, Eigen::Ref<Eigen::RowVectorXd> u) {
      u.setConstant(values[std::size_t(std::min<Index>(pieces - 1, i * pieces / steps))]);
    };
  };

  record("feedback", law.policy(), {});
  const double lo = problem.controls.u_min, hi = problem.controls.u_max;
  record("constant_u_min", piecewise(std::vector<double>(std::size_t(pieces), lo)), {lo});
  record("constant_u_max", piecewise(std::vector<double>(std::size_t(pieces), hi)), {hi});
  auto engine = make_stream(seed, 0);
  std::uniform_real_distribution<double> uniform(lo, hi);
  for (Index k = 0; k < n_adversaries; ++k) {
    std::vector<double> values(static_cast<std::size_t>(pieces));
    for (double& v : values) v = lo == hi ? lo : uniform(engine);
    std::ostringstream name;
    name << "random_" << k;
    record(name.str(), piecewise(values), values);
  }

  const double fb = report.entries.front().cost.value;
  for (const HarnessEntry& e : report.entries) {
    report.lower_bound_pass = report.lower_bound_pass && e.lower_bound_ok;
    report.feedback_minimal = report.feedback_minimal && fb <= e.cost.value;
  }
  return report;
}

QvReport qv_identification_check(const ValueFunction& value, Index paths, std::uint64_t stream_offset) {
  const ControlProblem& problem = value.problem();
  const Index steps = value.n_steps();
  const double h = value.dt();
  const Eigen::MatrixXd dw = sample_increments(steps, h, paths, value.mc().seed, stream_offset);
  Eigen::MatrixXd v(paths, steps + 1), z(paths, steps);
  ForwardStepper stepper(*problem.op, problem.f, h, problem.boundary);
  StepObserver observer = [&](Index i, double, const Eigen::MatrixXd& x) {
    v.col(i) = value.v_hat(i, x);
    if (i < steps) z.col(i) = value.z_hat(i, x);
  };
  simulate_ensemble(stepper, value.x0(), value.time(0), dw, {}, observer);

  Eigen::VectorXd qv = Eigen::VectorXd::Zero(paths), integral = Eigen::VectorXd::Zero(paths);
  for (Index i = 0; i < steps; ++i) {
    qv += (v.col(i + 1) - v.col(i)).cwiseProduct(dw.row(i).transpose());
    integral += h * z.col(i);
  }
  QvReport r;
  const double denom = std::sqrt(integral.squaredNorm() / double(paths));
  const double num = std::sqrt((qv - integral).squaredNorm() / double(paths));
  r.relative_rms = denom > 0.0 ? num / denom : num;
  r.mean_qv = mean(qv);
  r.mean_integral = mean(integral);
  return r;
}

MarkovReport markov_identification(const ValueFunction& value, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw InvalidArgument("markov_identification: fraction must lie in (0, 1]");
  const BsdeSolution& sol = value.solution();
  auto engine = make_stream(seed, 0);
  std::bernoulli_distribution pick(fraction);
  double sum = 0.0;
  long count = 0;
  for (Index p = 0; p < sol.samples(); ++p)
    for (Index i = 0; i < sol.n_steps(); ++i)
      if (pick(engine)) {
        const double d = sol.y_values(i, p) - sol.v_values(i, p);
        sum += d * d;
        ++count;
      }
  MarkovReport r;
  r.rms = count > 0 ? std::sqrt(sum / double(count)) : 0.0;
  r.y_range = sol.y_values.maxCoeff() - sol.y_values.minCoeff();
  r.ratio = r.y_range > 0.0 ? r.rms / r.y_range : r.rms;
  return r;
}

MildResidual mild_residual(const ValueFunction& value, Index probes, std::uint64_t stream_offset) {
  const ControlProblem& problem = value.problem();
  const Index steps = problem.stationary() ? std::max<Index>(1, value.n_steps() / 2) : value.n_steps();
  const double h = value.dt();
  const double disc = value.solution().discount();
  const Eigen::MatrixXd dw = sample_increments(steps, h, probes, value.mc().seed, stream_offset);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(probes);
  ForwardStepper stepper(*problem.op, problem.f, h, problem.boundary);
  double weight = 1.0;
  StepObserver observer = [&](Index i, double t, const Eigen::MatrixXd& x) {
    if (i < steps) {
      weight /= disc;
      const Eigen::VectorXd psi = state_cost(problem.cost, problem.grid(), t, x).transpose() +
                                  hamiltonian_batch(problem, t, value.z_hat(i, x));
      acc += h * weight * psi;
    } else {
      acc += weight * value.v_hat(i, x);
    }
  };
  simulate_ensemble(stepper, value.x0(), value.time(0), dw, {}, observer);

  MildResidual r;
  r.lhs = value.value();
  r.rhs = mean_estimate(acc);
  r.residual = std::abs(r.lhs.value - r.rhs.value);
  r.combined_half_width = combined_half_width(r.lhs.half_width, r.rhs.half_width);
  return r;
}

double fit_growth_constant(const Eigen::VectorXd& norms, const Eigen::VectorXd& values, double power) {
  if (norms.size() != values.size()) throw InvalidArgument("fit_growth_constant: size mismatch");
  double c = 0.0;
  for (Index j = 0; j < norms.size(); ++j) c = std::max(c, std::abs(values[j]) / std::pow(1.0 + norms[j], power));
  return c;
}

}  // namespace halfline
