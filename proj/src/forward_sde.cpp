#include "halfline/forward_sde.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <numbers>
#include <sstream>

#include "halfline/random.hpp"

namespace halfline {

Nonlinearity Nonlinearity::zero() { return {}; }

Nonlinearity Nonlinearity::linear(double c) {
  Nonlinearity n;
  n.name = "linear";
  n.f = [c](double, double y) { return c * y; };
  n.df = [c](double, double) { return c; };
  n.batch_f = [c](double, const Eigen::MatrixXd& x) -> Eigen::MatrixXd { return c * x; };
  n.batch_df = [c](double, const Eigen::MatrixXd& x) -> Eigen::MatrixXd {
    return Eigen::MatrixXd::Constant(x.rows(), x.cols(), c);
  };
  n.c_f = std::abs(c);
  return n;
}

Nonlinearity Nonlinearity::tanh(double amplitude) {
  Nonlinearity n;
  n.name = "tanh";
  n.f = [amplitude](double, double y) { return amplitude * std::tanh(y); };
  n.df = [amplitude](double, double y) {
    const double c = std::cosh(y);
    return amplitude / (c * c);
  };
  // tanh y = 1 - 2 / (e^{2y} + 1) vectorizes through Eigen's exp.
  n.batch_f = [amplitude](double, const Eigen::MatrixXd& x) -> Eigen::MatrixXd {
    return amplitude * (1.0 - 2.0 / ((2.0 * x.array()).exp() + 1.0));
  };
  n.batch_df = [amplitude](double, const Eigen::MatrixXd& x) -> Eigen::MatrixXd {
    const Eigen::ArrayXXd th = 1.0 - 2.0 / ((2.0 * x.array()).exp() + 1.0);
    return amplitude * (1.0 - th.square());
  };
  n.c_f = std::abs(amplitude);
  return n;
}

Eigen::MatrixXd Nonlinearity::eval(double t, const Eigen::MatrixXd& x) const {
  if (is_zero()) return Eigen::MatrixXd::Zero(x.rows(), x.cols());
  if (batch_f) return batch_f(t, x);
  return x.unaryExpr([&](double y) { return f(t, y); });
}

Eigen::MatrixXd Nonlinearity::eval_derivative(double t, const Eigen::MatrixXd& x) const {
  if (is_zero()) return Eigen::MatrixXd::Zero(x.rows(), x.cols());
  if (batch_df) return batch_df(t, x);
  return x.unaryExpr([&](double y) { return df(t, y); });
}

NonlinearityCheck check_nonlinearity(const Nonlinearity& f, long samples, std::uint64_t seed, double horizon) {
  NonlinearityCheck out;
  if (f.is_zero()) return out;
  auto engine = make_stream(seed, 0);
  std::uniform_real_distribution<double> time(0.0, horizon);
  std::normal_distribution<double> value(0.0, 3.0);
  for (long s = 0; s < samples; ++s) {
    const double t = time(engine);
    const double r1 = value(engine);
    const double r2 = value(engine);
    out.max_f_at_zero = std::max(out.max_f_at_zero, std::abs(f.f(t, 0.0)));
    if (r1 != r2) out.max_slope = std::max(out.max_slope, std::abs(f.f(t, r1) - f.f(t, r2)) / std::abs(r1 - r2));
  }
  const double slack = 1e-12 * (1.0 + f.c_f);
  out.within_bound = out.max_f_at_zero <= f.c_f + slack && out.max_slope <= f.c_f + slack;
  return out;
}

WienerPath sample_wiener(Index n_steps, double horizon, std::uint64_t seed, std::uint64_t stream, double t0) {
  if (n_steps < 1) throw InvalidArgument("sample_wiener: need at least one step");
  if (!(horizon > t0)) throw InvalidArgument("sample_wiener: horizon must exceed the start time");
  WienerPath w;
  w.t0 = t0;
  w.dt = (horizon - t0) / double(n_steps);
  w.seed = seed;
  w.stream = stream;
  w.increments = std::sqrt(w.dt) * standard_normals(n_steps, seed, stream);
  return w;
}

Eigen::MatrixXd sample_increments(Index n_steps, double dt, Index samples, std::uint64_t seed,
                                  std::uint64_t first_stream) {
  if (n_steps < 1 || samples < 1) throw InvalidArgument("sample_increments: empty ensemble");
  if (!(dt > 0.0)) throw InvalidArgument("sample_increments: dt must be positive");
  Eigen::MatrixXd out(n_steps, samples);
  const double scale = std::sqrt(dt);
  for (Index p = 0; p < samples; ++p)
    out.col(p) = scale * standard_normals(n_steps, seed, first_stream + std::uint64_t(p));
  return out;
}

FactorizationParams FactorizationParams::resolved(double theta) const {
  FactorizationParams r = *this;
  if (r.beta < 0.0) r.beta = 0.5 + theta / 8.0;
  if (!(r.beta > 0.5 && r.beta < 0.5 + theta / 4.0)) {
    std::ostringstream os;
    os << "factorization: beta=" << r.beta << " outside (1/2, 1/2+theta/4) = (0.5, " << 0.5 + theta / 4.0 << ")";
    throw InvalidArgument(os.str());
  }
  const double lower = r.alpha + 1.0 - r.beta + 1.0 / r.p;
  if (!(r.p > 0.0) || !(lower < r.gamma && r.gamma < 0.5)) {
    std::ostringstream os;
    os << "factorization: need alpha + 1 - beta + 1/p < gamma < 1/2, got " << lower << " < " << r.gamma
       << " < 0.5 violated";
    throw InvalidArgument(os.str());
  }
  return r;
}

namespace {

// int_a^b tau^{c-1} e^{-rate tau} d tau for 0 <= a < b, c in (0, 1).
double gamma_window(double c, double rate, double a, double b) {
  namespace bm = boost::math;
  if (rate < 1e-12) return (std::pow(b, c) - std::pow(a, c)) / c;
  const double xa = rate * a;
  const double xb = rate * b;
  const double scale = std::tgamma(c) * std::pow(rate, -c);
  if (xa > c) return scale * (bm::gamma_q(c, xa) - bm::gamma_q(c, xb));
  return scale * (bm::gamma_p(c, xb) - bm::gamma_p(c, xa));
}

// Spectral lag kernel G(lag, mode): W_A(t_i) = V sum_{j<i} G(i-j, :) dW_j.
Eigen::MatrixXd convolution_kernel(const Operator& op, Index n_steps, double dt, ConvolutionMethod method,
                                   const FactorizationParams& raw) {
  const Index n = op.size();
  const Eigen::VectorXd& mu = op.eigenvalues();
  const Eigen::VectorXd rate = op.shifted_eigenvalues();
  const Eigen::VectorXd weight = ((mu.array() + op.lambda()) * op.dirichlet_coefficients().array()).matrix();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n_steps + 1, n);

  if (method == ConvolutionMethod::DirectQuadrature) {
    for (Index lag = 1; lag <= n_steps; ++lag)
      g.row(lag) = (weight.array() * (-rate.array() * (double(lag) - 0.5) * dt).exp()).matrix().transpose();
    return g;
  }

  const FactorizationParams params = raw.resolved(op.grid().weight_spec().theta);
  const double gam = params.gamma;
  // inner[q, m]: (1/h) int over the part of source cell at lag q preceding the
  // evaluation point (cell midpoint) of (r - sigma)^{-gamma} e^{-rate (r - sigma)}.
  // outer[q, m]: int over the r-cell at lag q of (s - r)^{gamma - 1} e^{-rate (s - r)}.
  Eigen::MatrixXd inner(n_steps, n), outer(n_steps + 1, n);
  for (Index m = 0; m < n; ++m) {
    for (Index q = 0; q < n_steps; ++q) {
      const double a = q == 0 ? 0.0 : (double(q) - 0.5) * dt;
      const double b = (double(q) + 0.5) * dt;
      inner(q, m) = gamma_window(1.0 - gam, rate[m], a, q == 0 ? 0.5 * dt : b) / dt;
    }
    outer(0, m) = 0.0;
    for (Index q = 1; q <= n_steps; ++q)
      outer(q, m) = gamma_window(gam, rate[m], (double(q) - 1.0) * dt, double(q) * dt);
  }
  const double c = std::sin(std::numbers::pi * gam) / std::numbers::pi;
  for (Index lag = 1; lag <= n_steps; ++lag)
    for (Index m = 0; m < n; ++m) {
      double acc = 0.0;
      for (Index q = 1; q <= lag; ++q) acc += outer(q, m) * inner(lag - q, m);
      g(lag, m) = c * weight[m] * acc;
    }
  return g;
}

}  // namespace

std::vector<Eigen::VectorXd> stochastic_convolution(const Operator& op, const WienerPath& wiener,
                                                    ConvolutionMethod method, FactorizationParams params) {
  const Index steps = wiener.n_steps();
  const Eigen::MatrixXd g = convolution_kernel(op, steps, wiener.dt, method, params);
  std::vector<Eigen::VectorXd> out;
  out.reserve(std::size_t(steps + 1));
  for (Index i = 0; i <= steps; ++i) {
    Eigen::VectorXd coeff = Eigen::VectorXd::Zero(op.size());
    for (Index j = 0; j < i; ++j) coeff += wiener.increments[j] * g.row(i - j).transpose();
    out.push_back(op.basis() * coeff);
  }
  return out;
}

Eigen::MatrixXd stochastic_convolution_terminal(const Operator& op, const Eigen::MatrixXd& increments, double dt,
                                                ConvolutionMethod method, FactorizationParams params) {
  const Index steps = increments.rows();
  const Eigen::MatrixXd g = convolution_kernel(op, steps, dt, method, params);
  // coeff(m, j) = G(N - j, m)
  Eigen::MatrixXd coeff(op.size(), steps);
  for (Index j = 0; j < steps; ++j) coeff.col(j) = g.row(steps - j).transpose();
  return op.basis() * (coeff * increments);
}

ForwardStepper::ForwardStepper(const Operator& op, Nonlinearity f, double dt, BoundaryQuadrature boundary)
    : op_(&op), f_(std::move(f)), dt_(dt) {
  if (!(dt > 0.0)) throw InvalidArgument("forward stepper: dt must be positive");
  propagator_ = op.propagator(dt);
  boundary_ = boundary == BoundaryQuadrature::StepAverage ? op.boundary_step_average(dt)
                                                          : op.apply_semigroup_B(0.5 * dt, 1.0);
}

Eigen::MatrixXd ForwardStepper::drift_argument(double t, const Eigen::MatrixXd& x) const {
  if (f_.is_zero()) return x;
  return x + dt_ * f_.eval(t, x);
}

void ForwardStepper::advance(double t, Eigen::MatrixXd& x, const Eigen::Ref<const Eigen::RowVectorXd>& drive) const {
  const Eigen::MatrixXd arg = drift_argument(t, x);
  x.noalias() = propagator_ * arg;
  x.noalias() += boundary_ * drive;
}

void ForwardStepper::advance_tangent(double t, const Eigen::MatrixXd& x, Eigen::MatrixXd& d) const {
  Eigen::MatrixXd arg = d;
  if (!f_.is_zero()) arg += dt_ * f_.eval_derivative(t, x).cwiseProduct(d);
  d.noalias() = propagator_ * arg;
}

ForwardEnsemble simulate_ensemble(const ForwardStepper& stepper, const Eigen::VectorXd& x0, double t0,
                                  const Eigen::MatrixXd& increments, const ControlPolicy& policy,
                                  const StepObserver& observer, bool store_states, const ControlSet* bounds) {
  if (x0.size() != stepper.op().size()) throw InvalidArgument("simulate_ensemble: x0 not on the operator grid");
  const Index steps = increments.rows();
  const Index samples = increments.cols();
  const double dt = stepper.dt();
  ForwardEnsemble ens;
  ens.t0 = t0;
  ens.dt = dt;
  ens.increments = increments;
  if (policy) ens.controls.resize(steps, samples);

  Eigen::MatrixXd x = x0.replicate(1, samples);
  Eigen::RowVectorXd u = Eigen::RowVectorXd::Zero(samples);
  if (store_states) ens.states.reserve(std::size_t(steps + 1));
  for (Index i = 0; i < steps; ++i) {
    const double t = t0 + dt * double(i);
    if (observer) observer(i, t, x);
    if (store_states) ens.states.push_back(x);
    Eigen::RowVectorXd drive = increments.row(i);
    if (policy) {
      policy(i, t, x, u);
      if (bounds)
        for (Index p = 0; p < samples; ++p)
          if (!bounds->contains(u[p])) throw InvalidArgument("simulate_ensemble: control outside U");
      ens.controls.row(i) = u;
      drive += dt * u;
    }
    stepper.advance(t, x, drive);
    if (!x.allFinite()) throw NumericalFailure("simulate_ensemble: non-finite state at step " + std::to_string(i + 1));
  }
  if (observer) observer(steps, t0 + dt * double(steps), x);
  if (store_states) ens.states.push_back(x);
  ens.final_state = std::move(x);
  return ens;
}

namespace {

double weighted_sup_distance(const std::vector<Eigen::VectorXd>& a, const std::vector<Eigen::VectorXd>& b,
                             const Grid& grid) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, weighted_norm(a[i] - b[i], grid));
  return d;
}

}  // namespace

ForwardEnsemble solve_forward(const Operator& op, const Nonlinearity& f, const Eigen::VectorXd& x0,
                              const WienerPath& wiener, std::span<const double> control, const ControlSet* bounds,
                              ForwardOptions options) {
  const Index steps = wiener.n_steps();
  if (!control.empty() && Index(control.size()) != steps)
    throw InvalidArgument("solve_forward: need one control value per step");
  if (bounds)
    for (double u : control)
      if (!bounds->contains(u)) throw InvalidArgument("solve_forward: control outside U");

  const ForwardStepper stepper(op, f, wiener.dt, options.boundary);
  Eigen::RowVectorXd drive(steps);
  for (Index i = 0; i < steps; ++i)
    drive[i] = wiener.increments[i] + (control.empty() ? 0.0 : control[std::size_t(i)] * wiener.dt);

  if (options.scheme == ForwardScheme::ExponentialEuler) {
    ControlPolicy policy;
    if (!control.empty())
      policy = [&](Index i, double, const Eigen::MatrixXd&, Eigen::Ref<Eigen::RowVectorXd> u) {
        u[0] = control[std::size_t(i)];
      };
    return simulate_ensemble(stepper, x0, wiener.t0, wiener.increments, policy, {}, true, bounds);
  }

  // Picard: X^0_s = e^{(s-t)A} x, X^{n+1} = Lambda(X^n) on the whole trajectory.
  const Eigen::MatrixXd& e = stepper.propagator();
  const Eigen::VectorXd& b = stepper.boundary_vector();
  std::vector<Eigen::VectorXd> current(std::size_t(steps + 1));
  current[0] = x0;
  for (Index i = 0; i < steps; ++i) current[std::size_t(i + 1)] = e * current[std::size_t(i)];

  ForwardEnsemble ens;
  ens.t0 = wiener.t0;
  ens.dt = wiener.dt;
  ens.increments = wiener.increments;
  if (!control.empty()) ens.controls = Eigen::Map<const Eigen::VectorXd>(control.data(), steps);

  double previous = -1.0;
  bool converged = false;
  for (Index it = 0; it < options.max_iter; ++it) {
    std::vector<Eigen::VectorXd> next(std::size_t(steps + 1));
    next[0] = x0;
    for (Index i = 0; i < steps; ++i) {
      const double t = wiener.time(i);
      Eigen::VectorXd arg = next[std::size_t(i)];
      if (!f.is_zero())
        arg += wiener.dt * f.eval(t, current[std::size_t(i)]);
      next[std::size_t(i + 1)] = e * arg + b * drive[i];
    }
    const double dist = weighted_sup_distance(next, current, op.grid());
    ens.picard_distances.push_back(dist);
    if (previous > 0.0) ens.picard_ratios.push_back(dist / previous);
    previous = dist;
    current = std::move(next);
    if (dist < options.tol) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw ConvergenceFailure("solve_forward: Picard iteration did not reach tolerance within max_iter",
                             ens.picard_ratios);
  for (auto& s : current) ens.states.push_back(s);
  ens.final_state = ens.states.back();
  return ens;
}

std::vector<Eigen::VectorXd> variational_derivative(const Operator& op, const Nonlinearity& f,
                                                    const ForwardEnsemble& base, const Eigen::VectorXd& h,
                                                    BoundaryQuadrature boundary) {
  if (base.states.empty()) throw InvalidArgument("variational_derivative: base path has no stored states");
  if (h.size() != op.size()) throw InvalidArgument("variational_derivative: direction not on the grid");
  const ForwardStepper stepper(op, f, base.dt, boundary);
  std::vector<Eigen::VectorXd> out;
  out.reserve(base.states.size());
  Eigen::MatrixXd d = h;
  out.push_back(d);
  for (Index i = 0; i + 1 < Index(base.states.size()); ++i) {
    stepper.advance_tangent(base.time(i), base.states[std::size_t(i)].col(0), d);
    out.push_back(d);
  }
  return out;
}

std::vector<Eigen::VectorXd> theta_process(const Operator& op, const Nonlinearity& f, const ForwardEnsemble& base,
                                           double alpha, const Eigen::VectorXd& k) {
  if (!(alpha < 1.0) || alpha < 0.0) throw InvalidArgument("theta_process: alpha must lie in [0, 1)");
  if (base.states.empty()) throw InvalidArgument("theta_process: base path has no stored states");
  if (k.size() != op.size()) throw InvalidArgument("theta_process: direction not on the grid");
  const Eigen::MatrixXd e = op.propagator(base.dt);
  const Eigen::VectorXd step_mult = op.semigroup_multiplier(base.dt);
  // Spectral coordinates of (l - A + M)^alpha e^{(s-t)A} k, advanced one step at a time.
  Eigen::VectorXd forcing = op.fractional_multiplier(alpha).cwiseProduct(op.cobasis() * k);

  std::vector<Eigen::VectorXd> out;
  out.reserve(base.states.size());
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(op.size());
  out.push_back(theta);
  for (Index i = 0; i + 1 < Index(base.states.size()); ++i) {
    if (!f.is_zero()) {
      const double t = base.time(i);
      const Eigen::VectorXd grad = f.eval_derivative(t, base.states[std::size_t(i)].col(0));
      theta = e * (theta + base.dt * grad.cwiseProduct(theta + op.basis() * forcing));
    } else {
      theta.setZero();
    }
    forcing = forcing.cwiseProduct(step_mult);
    out.push_back(theta);
  }
  return out;
}

}  // namespace halfline
