#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "halfline/forward_sde.hpp"
#include "halfline/random.hpp"
#include "halfline/stats.hpp"

using namespace halfline;

namespace {

Operator standard(Index n = 200, double m = 0.0) {
  return build_operator(make_grid(20.0, n, Grading::Uniform, WeightSpecd{}), 1.0, m);
}

Eigen::VectorXd smooth_state(const Grid& g, double amplitude) {
  Eigen::VectorXd x(g.size());
  for (Index i = 0; i < g.size(); ++i) x[i] = amplitude * std::sin(0.4 * g.nodes()[i]) * std::exp(-0.1 * g.nodes()[i]);
  return x;
}

}  // namespace

TEST_CASE("wiener paths are reproducible and stream-separated") {
  const auto a = sample_wiener(50, 1.0, 9, 3);
  const auto b = sample_wiener(50, 1.0, 9, 3);
  const auto c = sample_wiener(50, 1.0, 9, 4);
  CHECK(a.increments == b.increments);
  CHECK(a.increments != c.increments);
  CHECK(a.dt == doctest::Approx(0.02));
  const Eigen::MatrixXd batch = sample_increments(50, 0.02, 3, 9, 2);
  CHECK(batch.col(1) == a.increments);
  CHECK_THROWS_AS(sample_wiener(0, 1.0, 1, 1), InvalidArgument);
  CHECK_THROWS_AS(sample_wiener(5, 0.0, 1, 1), InvalidArgument);
}

TEST_CASE("terminal Brownian moments") {
  const double horizon = 2.0;
  const Index paths = 100000;
  const Eigen::MatrixXd inc = sample_increments(10, horizon / 10.0, paths, 77);
  const Eigen::VectorXd wt = inc.colwise().sum().transpose();
  CHECK(std::abs(mean(wt)) <= 4.0 * std::sqrt(horizon / double(paths)));
  CHECK(std::abs(sample_variance(wt) - horizon) <= 0.05 * horizon);
}

TEST_CASE("nonlinearity spot check") {
  CHECK(check_nonlinearity(Nonlinearity::tanh(0.5), 10000, 1).within_bound);
  CHECK(check_nonlinearity(Nonlinearity::linear(-0.3), 1000, 1).within_bound);
  Nonlinearity bad = Nonlinearity::tanh(0.5);
  bad.c_f = 0.1;
  CHECK_FALSE(check_nonlinearity(bad, 1000, 1).within_bound);
}

TEST_CASE("stochastic convolution with zero noise is zero") {
  const auto op = standard(40);
  WienerPath w;
  w.dt = 0.01;
  w.increments = Eigen::VectorXd::Zero(100);
  for (auto method : {ConvolutionMethod::DirectQuadrature, ConvolutionMethod::Factorization})
    for (const auto& s : stochastic_convolution(op, w, method)) CHECK(s.isZero());
}

TEST_CASE("factorization parameters are checked") {
  CHECK_NOTHROW(FactorizationParams{}.resolved(0.5));
  CHECK_THROWS_AS((FactorizationParams{0.45, -1.0, 2.0, 0.0}.resolved(0.5)), InvalidArgument);
  CHECK_THROWS_AS((FactorizationParams{0.45, 0.7, 100.0, 0.0}.resolved(0.5)), InvalidArgument);
  CHECK_THROWS_AS((FactorizationParams{0.55, -1.0, 100.0, 0.0}.resolved(0.5)), InvalidArgument);
}

TEST_CASE("single-path and batched convolution agree") {
  const auto op = standard(60);
  const auto w = sample_wiener(80, 1.0, 5, 0);
  for (auto method : {ConvolutionMethod::DirectQuadrature, ConvolutionMethod::Factorization}) {
    const auto traj = stochastic_convolution(op, w, method);
    const Eigen::MatrixXd term = stochastic_convolution_terminal(op, w.increments, w.dt, method);
    CHECK((traj.back() - term.col(0)).norm() <= 1e-10 * (1.0 + term.norm()));
  }
}

TEST_CASE("direct convolution equals the uncontrolled midpoint scheme") {
  const auto op = standard(50);
  const auto w = sample_wiener(100, 1.0, 8, 1);
  ForwardOptions opt;
  opt.boundary = BoundaryQuadrature::Midpoint;
  const auto ens = solve_forward(op, Nonlinearity::zero(), Eigen::VectorXd::Zero(50), w, {}, nullptr, opt);
  const auto traj = stochastic_convolution(op, w, ConvolutionMethod::DirectQuadrature);
  for (Index i = 0; i <= 100; i += 10) CHECK((ens.state(i) - traj[std::size_t(i)]).norm() <= 1e-10);
}

TEST_CASE("direct quadrature and factorization agree on E|W_A(T)|") {
  const auto op = standard();
  const Eigen::MatrixXd inc = sample_increments(200, 1.0 / 200.0, 10000, 2024);
  const Eigen::VectorXd direct =
      weighted_norms(stochastic_convolution_terminal(op, inc, 1.0 / 200.0, ConvolutionMethod::DirectQuadrature), op.grid());
  const Eigen::VectorXd fact =
      weighted_norms(stochastic_convolution_terminal(op, inc, 1.0 / 200.0, ConvolutionMethod::Factorization), op.grid());
  const double d = mean(direct);
  const double f = mean(fact);
  MESSAGE("E|W_A(T)| direct " << d << " factorization " << f);
  CHECK(std::abs(d - f) <= 0.03 * d);
}

TEST_CASE("E|W_A(T)|^2 is stable under time refinement") {
  const auto op = standard();
  const Eigen::MatrixXd fine = sample_increments(400, 1.0 / 400.0, 5000, 31);
  Eigen::MatrixXd coarse(200, fine.cols());
  for (Index i = 0; i < 200; ++i) coarse.row(i) = fine.row(2 * i) + fine.row(2 * i + 1);
  auto second_moment = [&](const Eigen::MatrixXd& inc, double dt) {
    const Eigen::VectorXd n =
        weighted_norms(stochastic_convolution_terminal(op, inc, dt, ConvolutionMethod::DirectQuadrature), op.grid());
    return mean(n.array().square().matrix());
  };
  const double c = second_moment(coarse, 1.0 / 200.0);
  const double f = second_moment(fine, 1.0 / 400.0);
  CHECK(std::isfinite(f));
  CHECK(std::abs(c - f) <= 0.05 * f);
}

TEST_CASE("noise-free uncontrolled solve is the semigroup") {
  const auto op = standard(80);
  const Eigen::VectorXd x0 = smooth_state(op.grid(), 1.0);
  WienerPath w;
  w.dt = 0.01;
  w.increments = Eigen::VectorXd::Zero(100);
  const auto ens = solve_forward(op, Nonlinearity::zero(), x0, w);
  CHECK(ens.state(0) == x0);
  for (Index i : {1, 37, 100})
    CHECK((ens.state(i) - op.semigroup_apply(0.01 * double(i), x0)).norm() <= 1e-11 * x0.norm());
}

TEST_CASE("constant boundary control relaxes to the steady state") {
  // The slowest mode decays like exp(-(pi/xi_max)^2 t); xi_max = 10 relaxes by t = 50.
  const auto op = build_operator(make_grid(10.0, 200, Grading::Uniform, WeightSpecd{}), 1.0);
  const Index steps = 1000;
  WienerPath w;
  w.dt = 50.0 / double(steps);
  w.increments = Eigen::VectorXd::Zero(steps);
  const std::vector<double> u(std::size_t(steps), 0.7);
  const ControlSet bounds;
  const auto ens = solve_forward(op, Nonlinearity::zero(), Eigen::VectorXd::Zero(200), w, u, &bounds);
  const Eigen::VectorXd ss = op.steady_state_from_boundary(0.7);
  CHECK(weighted_norm(ens.final_state.col(0) - ss, op.grid()) <= 0.01 * weighted_norm(ss, op.grid()));
}

TEST_CASE("step-averaged boundary channel holds the steady state fixed") {
  const auto op = standard(100);
  const ForwardStepper stepper(op, Nonlinearity::zero(), 0.05);
  Eigen::MatrixXd x = op.steady_state_from_boundary(-0.4);
  const Eigen::MatrixXd x0 = x;
  Eigen::RowVectorXd drive(1);
  drive << -0.4 * 0.05;
  stepper.advance(0.0, x, drive);
  CHECK((x - x0).norm() <= 1e-10 * x0.norm());
}

TEST_CASE("controls outside U are rejected") {
  const auto op = standard(20);
  const auto w = sample_wiener(4, 1.0, 1, 1);
  const std::vector<double> u{0.0, 1.5, 0.0, 0.0};
  const ControlSet bounds;
  CHECK_THROWS_AS(solve_forward(op, Nonlinearity::zero(), Eigen::VectorXd::Zero(20), w, u, &bounds), InvalidArgument);
  const std::vector<double> short_u{0.0};
  CHECK_THROWS_AS(solve_forward(op, Nonlinearity::zero(), Eigen::VectorXd::Zero(20), w, short_u), InvalidArgument);
}

TEST_CASE("ensemble mean of the uncontrolled state is the semigroup") {
  const auto op = standard();
  const Eigen::VectorXd x0 = smooth_state(op.grid(), 2.0);
  const ForwardStepper stepper(op, Nonlinearity::zero(), 1.0 / 200.0);
  const auto ens = simulate_ensemble(stepper, x0, 0.0, sample_increments(200, 1.0 / 200.0, 10000, 99));
  const Eigen::VectorXd m = ens.final_state.rowwise().mean();
  const Eigen::VectorXd sd =
      ((ens.final_state.colwise() - m).array().square().rowwise().sum() / double(ens.samples() - 1)).sqrt();
  const Eigen::VectorXd expect = op.semigroup_apply(1.0, x0);
  for (Index i = 0; i < op.size(); ++i) CHECK(std::abs(m[i] - expect[i]) <= 4.0 * sd[i] / 100.0 + 1e-14);
}

TEST_CASE("Picard iteration contracts and matches exponential Euler") {
  const auto op = standard();
  const auto f = Nonlinearity::tanh(0.5);
  const Eigen::VectorXd x0 = smooth_state(op.grid(), 1.0);
  const auto w = sample_wiener(400, 1.0, 4, 0);
  ForwardOptions picard;
  picard.scheme = ForwardScheme::PicardFixedPoint;
  const auto p = solve_forward(op, f, x0, w, {}, nullptr, picard);
  const auto e = solve_forward(op, f, x0, w);
  bool contracted = false;
  for (std::size_t k = 0; k < std::min<std::size_t>(10, p.picard_ratios.size()); ++k)
    contracted = contracted || p.picard_ratios[k] <= 0.5;
  CHECK(contracted);
  for (Index i = 0; i <= 400; i += 50) {
    const double scale = std::max(weighted_norm(e.state(i), op.grid()), 1e-12);
    CHECK(weighted_norm(p.state(i) - e.state(i), op.grid()) <= 0.02 * scale);
  }
}

TEST_CASE("Picard failure carries the ratio history") {
  const auto op = standard(30);
  const auto w = sample_wiener(20, 1.0, 4, 0);
  ForwardOptions picard;
  picard.scheme = ForwardScheme::PicardFixedPoint;
  picard.max_iter = 3;
  try {
    solve_forward(op, Nonlinearity::tanh(0.5), smooth_state(op.grid(), 1.0), w, {}, nullptr, picard);
    FAIL("expected ConvergenceFailure");
  } catch (const ConvergenceFailure& err) {
    CHECK(err.ratios().size() == 2);
  }
}

TEST_CASE("variational derivative of a linear drift is the shifted semigroup") {
  // First-order scheme: the mismatch is c^2 h T / 2, so h is taken small.
  const auto op = build_operator(make_grid(5.0, 20, Grading::Uniform, WeightSpecd{}), 1.0);
  const double c = 0.5;
  const Index steps = 200000;
  WienerPath w = sample_wiener(steps, 1.0, 3, 0);
  const auto base = solve_forward(op, Nonlinearity::linear(c), smooth_state(op.grid(), 1.0), w);
  const Eigen::VectorXd h = standard_normals(20, 3, 1);
  const auto d = variational_derivative(op, Nonlinearity::linear(c), base, h);
  for (Index i : {steps / 4, steps}) {
    const double s = base.time(i);
    const Eigen::VectorXd expect = std::exp(c * s) * op.semigroup_apply(s, h);
    CHECK((d[std::size_t(i)] - expect).norm() <= 1e-6 * expect.norm());
  }
  for (const auto& v : variational_derivative(op, Nonlinearity::linear(c), base, Eigen::VectorXd::Zero(20)))
    CHECK(v.isZero());
}

TEST_CASE("variational derivative matches finite differences") {
  const auto op = standard();
  const auto f = Nonlinearity::tanh(0.5);
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    const Eigen::VectorXd x = 2.0 * standard_normals(op.size(), 50, 2 * trial);
    Eigen::VectorXd h = standard_normals(op.size(), 50, 2 * trial + 1);
    h /= weighted_norm(h, op.grid());
    const auto w = sample_wiener(200, 1.0, 51, trial);
    const auto base = solve_forward(op, f, x, w);
    const Eigen::VectorXd d = variational_derivative(op, f, base, h).back();
    auto mismatch = [&](double eps) {
      const auto bumped = solve_forward(op, f, x + eps * h, w);
      const Eigen::VectorXd fd = (bumped.final_state.col(0) - base.final_state.col(0)) / eps;
      return weighted_norm(fd - d, op.grid());
    };
    const double ratio = mismatch(1e-3) / mismatch(5e-4);
    CHECK(ratio >= 2.0 / 2.5);
    CHECK(ratio <= 2.0 * 2.5);
  }
}

TEST_CASE("theta process identity on a 3-node grid") {
  const auto op = build_operator(make_grid(4.0, 3, Grading::Uniform, WeightSpecd{}), 1.0);
  const auto f = Nonlinearity::tanh(0.5);
  Eigen::VectorXd x0(3), k(3);
  x0 << 0.3, -1.2, 0.8;
  k << 1.0, -0.5, 0.25;
  const auto base = solve_forward(op, f, x0, sample_wiener(100, 1.0, 6, 0));
  for (double alpha : {0.0, 0.3, 0.9}) {
    const Eigen::VectorXd lifted = op.fractional_apply(alpha, k);
    const auto theta = theta_process(op, f, base, alpha, k);
    const auto d = variational_derivative(op, f, base, lifted);
    for (Index i = 1; i <= 100; ++i) {
      const Eigen::VectorXd expect = d[std::size_t(i)] - op.semigroup_apply(base.time(i), lifted);
      CHECK((theta[std::size_t(i)] - expect).norm() <= 1e-6 * expect.norm());
    }
  }
}

TEST_CASE("theta process edge cases") {
  const auto op = standard(30);
  const auto base = solve_forward(op, Nonlinearity::zero(), Eigen::VectorXd::Ones(30), sample_wiener(10, 1.0, 1, 0));
  for (const auto& v : theta_process(op, Nonlinearity::zero(), base, 0.5, Eigen::VectorXd::Ones(30))) CHECK(v.isZero());
  CHECK_THROWS_AS(theta_process(op, Nonlinearity::zero(), base, 1.0, Eigen::VectorXd::Ones(30)), InvalidArgument);
  CHECK_THROWS_AS(theta_process(op, Nonlinearity::zero(), base, -0.1, Eigen::VectorXd::Ones(30)), InvalidArgument);
}

TEST_CASE("sensitivities stay bounded over long horizons with the M shift") {
  const auto op = standard(100, 2.0);
  const auto f = Nonlinearity::tanh(0.5);
  const Eigen::VectorXd k = standard_normals(100, 8, 0);
  const double knorm = weighted_norm(k, op.grid());
  std::vector<double> theta_sup, grad_sup;
  for (double horizon : {1.0, 2.0, 4.0, 8.0}) {
    const auto base = solve_forward(op, f, smooth_state(op.grid(), 1.0), sample_wiener(Index(100 * horizon), horizon, 8, 1));
    double ts = 0.0, gs = 0.0;
    for (const auto& v : theta_process(op, f, base, 0.25, k)) ts = std::max(ts, weighted_norm(v, op.grid()) / knorm);
    for (const auto& v : variational_derivative(op, f, base, k)) gs = std::max(gs, weighted_norm(v, op.grid()) / knorm);
    theta_sup.push_back(ts);
    grad_sup.push_back(gs);
  }
  for (std::size_t j = 1; j < theta_sup.size(); ++j) {
    CHECK(theta_sup[j] <= 1.05 * theta_sup[0]);
    CHECK(grad_sup[j] <= 1.05 * grad_sup[0]);
  }
}

TEST_CASE("a priori moment bound scales at most quadratically") {
  const auto op = standard();
  const auto f = Nonlinearity::tanh(0.5);
  const ForwardStepper stepper(op, f, 1.0 / 200.0);
  const Eigen::MatrixXd inc = sample_increments(200, 1.0 / 200.0, 10000, 404);
  Eigen::VectorXd unit = smooth_state(op.grid(), 1.0);
  unit /= weighted_norm(unit, op.grid());
  // -A is positive, so (-A)^alpha is the spectral multiplier mu^alpha; alpha = theta / 8.
  const double alpha = 0.5 / 8.0;
  const Eigen::MatrixXd frac = op.spectral_matrix(op.eigenvalues().array().pow(alpha).matrix());
  Eigen::VectorXd radius(10), plain(10), smooth(10);
  for (Index j = 0; j < 10; ++j) {
    radius[j] = 1.0 + double(j);
    Eigen::VectorXd sup0 = Eigen::VectorXd::Zero(inc.cols()), sup1 = sup0;
    const StepObserver obs = [&](Index, double t, const Eigen::MatrixXd& x) {
      sup0 = sup0.cwiseMax(weighted_norms(x, op.grid()).array().square().matrix());
      const Eigen::MatrixXd fx = frac * x;
      sup1 = sup1.cwiseMax((std::pow(t, 2.0 * alpha) * weighted_norms(fx, op.grid()).array().square()).matrix());
    };
    simulate_ensemble(stepper, radius[j] * unit, 0.0, inc, {}, obs);
    plain[j] = mean(sup0);
    smooth[j] = mean(sup1);
    CHECK(std::isfinite(plain[j]));
    CHECK(std::isfinite(smooth[j]));
  }
  const Eigen::VectorXd onep = (radius.array() + 1.0).matrix();
  CHECK(loglog_slope(onep, plain) <= 2.1);
  CHECK(loglog_slope(onep, smooth) <= 2.1);
}
