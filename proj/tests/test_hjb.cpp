#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "halfline/hjb_control.hpp"
#include "halfline/sampling.hpp"

using namespace halfline;

namespace {

std::shared_ptr<const Operator> small_operator(double m_shift = 0.0) {
  return std::make_shared<const Operator>(build_operator(make_grid(10.0, 60, Grading::Uniform, WeightSpecd{}), 1.0, m_shift));
}

std::map<std::string, double> tracking(double scale) {
  return {{"q", scale}, {"r", scale}, {"target", 0.5}, {"window", 2.0}, {"terminal_q", scale}};
}

ControlProblem tracking_problem(double scale = 1.0) {
  ControlProblem p;
  p.op = small_operator();
  p.f = Nonlinearity::tanh(0.5);
  p.cost = make_cost("quadratic_tracking", tracking(scale), *p.op);
  p.controls = ControlSet{-1.0, 1.0};
  return p;
}

McConfig small_mc(Index steps = 50) {
  McConfig mc;
  mc.n_steps = steps;
  mc.samples = 2000;
  mc.stationary_dt = 0.1;
  mc.rate_diagnostic = false;
  return mc;
}

const Eigen::VectorXd& zero_start() {
  static const Eigen::VectorXd x = Eigen::VectorXd::Zero(60);
  return x;
}

}  // namespace

TEST_CASE("bang-bang selection without a control cost") {
  ControlProblem p = tracking_problem();
  p.cost = make_cost("zero", {}, *p.op);
  Eigen::VectorXd z(3), gamma;
  z << -2.0, 0.0, 3.0;
  const Eigen::VectorXd h = hamiltonian_batch(p, 0.0, z, &gamma);
  CHECK(gamma[0] == 1.0);
  CHECK(gamma[1] == -1.0);  // ties go to u_min
  CHECK(gamma[2] == -1.0);
  CHECK(h[0] == doctest::Approx(-2.0));
  CHECK(h[1] == doctest::Approx(0.0));
  CHECK(h[2] == doctest::Approx(-3.0));
}

TEST_CASE("feedback of the quadratic control cost is clamp(-z / 2r)") {
  const ValueFunction vf(tracking_problem(), small_mc(), zero_start());
  const FeedbackLaw law(vf);
  Eigen::MatrixXd x(60, 8);
  for (Index j = 0; j < 8; ++j) x.col(j) = double(j) * random_state(*vf.problem().op, 3, std::uint64_t(j));
  for (Index i : {Index(0), Index(20), Index(49)}) {
    const Eigen::VectorXd z = vf.z_hat(i, x);
    const Eigen::RowVectorXd u = law.controls(i, x);
    for (Index j = 0; j < 8; ++j) CHECK(u[j] == doctest::Approx(std::clamp(-z[j] / 2.0, -1.0, 1.0)).epsilon(1e-6));
  }
  CHECK(law(vf.time(20), x.col(3)) == law.controls(20, Eigen::MatrixXd(x.col(3)))[0]);
}

TEST_CASE("control-independent cost: every control costs the value") {
  ControlProblem p = tracking_problem();
  p.cost = make_cost("constant", {{"c", 0.4}}, *p.op);
  const ValueFunction vf(p, small_mc(), zero_start());
  CHECK(std::abs(vf.value().value - 0.4) < 1e-10);
  const ClosedLoopRun run = run_closed_loop(FeedbackLaw(vf), zero_start(), 500);
  CHECK(std::abs(run.cost.value - 0.4) < 1e-10);
  CHECK(run.controls_in_U);
}

TEST_CASE("harness, Markov and mild residual on a small tracking problem") {
  const ValueFunction vf(tracking_problem(), small_mc(), zero_start());
  const HarnessReport r = optimality_harness(FeedbackLaw(vf), 3, 1);
  REQUIRE(r.entries.size() == 6);
  CHECK(r.lower_bound_pass);
  CHECK(r.feedback_minimal);
  CHECK(markov_identification(vf).ratio <= 0.05);
  CHECK(mild_residual(vf, 2000).pass());
}

TEST_CASE("quadratic variation identifies z for the spectral terminal cost") {
  ControlProblem p;
  p.op = small_operator();
  p.cost = make_cost("spectral_terminal", {{"mode", 0.0}, {"scale", 1.0}}, *p.op);
  p.controls = ControlSet{0.0, 0.0};
  const Eigen::VectorXd x0 = 0.7 * p.op->basis().col(0);
  const ValueFunction vf(p, small_mc(200), x0);
  const QvReport qv = qv_identification_check(vf, 2000);
  CHECK(qv.relative_rms <= 0.15);
}

TEST_CASE("scaling the cost scales the value") {
  const ValueFunction one(tracking_problem(1.0), small_mc(), zero_start());
  const ValueFunction two(tracking_problem(2.0), small_mc(), zero_start());
  CHECK(two.value().value == doctest::Approx(2.0 * one.value().value).epsilon(1e-9));
}

TEST_CASE("discounted value function: bounded, from t = 0 only") {
  ControlProblem p = tracking_problem();
  p.op = small_operator(2.0);
  p.mu = 1.0;
  p.cost = make_cost("quadratic_tracking",
                     {{"q", 1.0}, {"r", 1.0}, {"target", 0.5}, {"window", 2.0}, {"terminal_q", 0.0}, {"cap", 1.0}}, *p.op);
  const ValueFunction vf(p, small_mc(), zero_start());
  CHECK(vf.solution().v_values.cwiseAbs().maxCoeff() <= psi_bound(p) / p.mu + 3.0 * vf.value().half_width);
  CHECK(vf.v_hat(vf.n_steps(), Eigen::MatrixXd::Ones(60, 2)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(mild_residual(vf, 2000).pass());
  CHECK_THROWS_AS(ValueFunction(p, small_mc(), zero_start(), 0.5), InvalidArgument);
}

TEST_CASE("growth constant") {
  Eigen::VectorXd norms(3), values(3);
  norms << 0.0, 1.0, 3.0;
  values << 0.5, -2.0, 8.0;
  CHECK(fit_growth_constant(norms, values) == doctest::Approx(0.5));
  CHECK_THROWS_AS(fit_growth_constant(norms, values.head(2)), InvalidArgument);
}
