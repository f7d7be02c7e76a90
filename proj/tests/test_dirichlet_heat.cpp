#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <numbers>

#include "halfline/dirichlet_heat.hpp"
#include "halfline/random.hpp"
#include "halfline/sampling.hpp"
#include "halfline/stats.hpp"

using namespace halfline;

namespace {

Operator standard(Index n = 200, Grading g = Grading::Uniform, double m = 0.0) {
  return build_operator(make_grid(20.0, n, g, WeightSpecd{}), 1.0, m);
}

double rel_weighted(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Grid& g) {
  return weighted_norm(a - b, g) / weighted_norm(b, g);
}

}  // namespace

TEST_CASE("eigenvalues of the 3-node operator") {
  const auto op = build_operator(make_grid(4.0, 3, Grading::Uniform, WeightSpecd{}), 1.0);
  for (int k = 1; k <= 3; ++k)
    CHECK(op.eigenvalues()[k - 1] == doctest::Approx(2.0 * (1.0 - std::cos(k * std::numbers::pi / 4.0))).epsilon(1e-12));
}

TEST_CASE("smallest eigenvalue approaches the continuum Dirichlet value") {
  const auto op = standard(400);
  const double continuum = std::pow(std::numbers::pi / 20.0, 2);
  CHECK(std::abs(op.eigenvalues()[0] - continuum) <= 0.01 * continuum);
}

TEST_CASE("M shift moves every eigenvalue by M") {
  const auto a = standard(50);
  const auto b = standard(50, Grading::Uniform, 2.5);
  CHECK(((b.shifted_eigenvalues() - a.eigenvalues()).array() - 2.5).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("build_operator rejects non-positive lambda and negative M") {
  const auto g = make_grid(1.0, 4, Grading::Uniform, WeightSpecd{});
  CHECK_THROWS_AS(build_operator(g, 0.0), InvalidArgument);
  CHECK_THROWS_AS(build_operator(g, 1.0, -1.0), InvalidArgument);
}

TEST_CASE("decomposition invariants") {
  for (auto grading : {Grading::Uniform, Grading::BoundaryGraded}) {
    const auto op = standard(120, grading);
    const Index n = op.size();
    CHECK(op.eigenvalues().minCoeff() > 0.0);
    for (Index k = 1; k < n; ++k) CHECK(op.eigenvalues()[k] > op.eigenvalues()[k - 1]);
    const Eigen::MatrixXd& q = op.eigenvectors();
    CHECK((q.transpose() * q - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() <= 1e-10);
    const Eigen::MatrixXd recon = op.basis() * (-op.eigenvalues()).asDiagonal() * op.cobasis();
    CHECK((op.dense_matrix() - recon).cwiseAbs().maxCoeff() <= 1e-9 * op.eigenvalues().maxCoeff());
    CHECK((op.cobasis() * op.basis() - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("semigroup basic properties") {
  const auto op = standard(80);
  const Eigen::VectorXd x = standard_normals(80, 1, 0);
  CHECK((op.semigroup_apply(0.0, x) - x).cwiseAbs().maxCoeff() <= 1e-12);
  for (Index k : {0, 5, 40}) {
    const Eigen::VectorXd e = op.basis().col(k);
    const double t = 0.3;
    const Eigen::VectorXd expect = std::exp(-op.eigenvalues()[k] * t) * e;
    CHECK((op.semigroup_apply(t, e) - expect).cwiseAbs().maxCoeff() <= 1e-12 * e.cwiseAbs().maxCoeff());
  }
  for (double t : {0.0, 1e-4, 0.01, 0.5, 3.0, 100.0})
    CHECK(op.semigroup_apply(t, x).norm() <= x.norm() * (1.0 + 1e-12));
  CHECK_THROWS_AS(op.semigroup_apply(-1e-3, x), InvalidArgument);
}

TEST_CASE("semigroup property e^{sA} e^{tA} = e^{(s+t)A}") {
  const auto op = standard(60, Grading::BoundaryGraded, 0.5);
  const Eigen::VectorXd x = standard_normals(60, 2, 0);
  const Eigen::VectorXd lhs = op.semigroup_apply(0.2, op.semigroup_apply(0.3, x));
  CHECK((lhs - op.semigroup_apply(0.5, x)).norm() <= 1e-12 * x.norm());
}

TEST_CASE("fractional powers") {
  for (double m : {0.0, 2.0}) {
    const auto op = standard(100, Grading::BoundaryGraded, m);
    const Eigen::VectorXd x = standard_normals(100, 4, 0);
    CHECK((op.fractional_apply(0.0, x) - x).norm() <= 1e-12 * x.norm());
    // Direct tridiagonal apply of (lambda + M) I - A.
    const Eigen::VectorXd direct = (op.lambda() + m) * x - op.apply_matrix(x);
    CHECK((op.fractional_apply(1.0, x) - direct).norm() <= 1e-9 * direct.norm());
    const Eigen::VectorXd composed = op.fractional_apply(0.3, op.fractional_apply(-0.8, x));
    const Eigen::VectorXd once = op.fractional_apply(-0.5, x);
    CHECK((composed - once).norm() <= 1e-9 * once.norm());
  }
}

TEST_CASE("dirichlet map") {
  const auto op = build_operator(make_grid(4.0, 3, Grading::Uniform, WeightSpecd{}), 1.0);
  CHECK(op.dirichlet_map(1.0)[0] == doctest::Approx(0.36787944117144233).epsilon(1e-14));
  CHECK(op.dirichlet_map(0.0).isZero());
  CHECK((op.dirichlet_map(2.0 * 0.7) - 2.0 * op.dirichlet_map(0.7)).cwiseAbs().maxCoeff() <= 1e-15);
  const Eigen::VectorXd psi = standard(100).dirichlet_profile();
  for (Index i = 0; i < psi.size(); ++i) {
    CHECK(psi[i] > 0.0);
    CHECK(psi[i] <= 1.0);
    if (i > 0) CHECK(psi[i] < psi[i - 1]);
  }
}

TEST_CASE("boundary kernel integrates to erfc") {
  // Sanity of the analytic oracle itself: int_0^t K(s, xi) ds = erfc(xi / (2 sqrt t)).
  using boost::math::quadrature::gauss_kronrod;
  for (double t : {0.05, 0.5, 2.0})
    for (double xi : {0.1, 0.5, 1.0, 3.0}) {
      const double integral =
          gauss_kronrod<double, 61>::integrate([&](double s) { return boundary_heat_kernel(s, xi); }, 0.0, t, 20, 1e-13);
      CHECK(integral == doctest::Approx(std::erfc(xi / (2.0 * std::sqrt(t)))).epsilon(1e-9));
    }
}

TEST_CASE("e^{tA}B matches the halfline boundary kernel") {
  const auto op = standard(400);
  for (double t : {0.05, 0.1, 0.2, 0.5}) {
    Eigen::VectorXd k(op.size());
    for (Index i = 0; i < op.size(); ++i) k[i] = boundary_heat_kernel(t, op.grid().nodes()[i]);
    CHECK(rel_weighted(op.apply_semigroup_B(t, 1.0), k, op.grid()) <= 0.02);
    CHECK(rel_weighted(op.apply_semigroup_B(t, 2.5), 2.5 * k, op.grid()) <= 0.02);
  }
  CHECK(op.apply_semigroup_B(0.1, 0.0).isZero());
  CHECK_THROWS_AS(op.apply_semigroup_B(0.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(op.apply_semigroup_B(-0.1, 1.0), InvalidArgument);
}

TEST_CASE("e^{tA}B blow-up rate as t -> 0") {
  // The continuum slope is -(1 - (1/2 + theta/4)) = -0.375 exactly; resolving
  // sqrt(t) down to t = 1e-3 needs nodes clustered at the boundary.
  const auto op = standard(400, Grading::BoundaryGraded);
  Eigen::VectorXd ts(9), norms(9);
  for (Index j = 0; j < 9; ++j) {
    ts[j] = std::pow(10.0, -3.0 + 2.0 * double(j) / 8.0);
    norms[j] = weighted_norm(op.apply_semigroup_B(ts[j], 1.0), op.grid());
  }
  const double slope = loglog_slope(ts, norms);
  CHECK(slope >= -1.0);
  CHECK(slope <= -0.375);
}

TEST_CASE("step average of e^{rA}B") {
  const auto op = standard(100);
  const double h = 0.01;
  // Composite midpoint reference on a fine subdivision of (0, h).
  Eigen::VectorXd ref = Eigen::VectorXd::Zero(op.size());
  const int m = 4000;
  for (int j = 0; j < m; ++j) ref += op.apply_semigroup_B((j + 0.5) * h / m, 1.0) / double(m);
  CHECK((op.boundary_step_average(h) - ref).norm() <= 1e-6 * ref.norm());
}

TEST_CASE("steady state from boundary") {
  const auto op = standard(400);
  Eigen::VectorXd ramp(op.size());
  for (Index i = 0; i < op.size(); ++i) ramp[i] = 0.8 * (1.0 - op.grid().nodes()[i] / 20.0);
  CHECK(rel_weighted(op.steady_state_from_boundary(0.8), ramp, op.grid()) <= 0.01);
  CHECK(op.steady_state_from_boundary(0.0).isZero());
  CHECK((op.steady_state_from_boundary(1.5) - 1.5 * op.steady_state_from_boundary(1.0)).norm() <=
        1e-12 * op.steady_state_from_boundary(1.5).norm());
}

TEST_CASE("smoothing estimate slope") {
  const auto op = standard();
  Eigen::VectorXd ts(9);
  for (Index j = 0; j < 9; ++j) ts[j] = std::pow(10.0, -3.0 + 2.0 * double(j) / 8.0);
  for (double beta : {0.25, 0.5, 0.75}) {
    for (std::uint64_t s = 0; s < 50; ++s) {
      const Eigen::VectorXd x = random_state(op, 21, s);
      Eigen::VectorXd norms(9);
      for (Index j = 0; j < 9; ++j)
        norms[j] = weighted_norm(op.fractional_apply(beta, op.semigroup_apply(ts[j], x)), op.grid());
      CHECK(loglog_slope(ts, norms) >= -beta - 0.1);
    }
  }
}

TEST_CASE("weighted square integrability of e^{sA}B under time refinement") {
  // gamma < 2 alpha - 1 with alpha in (1/2, 1/2 + theta/4): alpha = 0.55, gamma = 0.05.
  const auto op = standard();
  const double gam = 0.05;
  auto integral = [&](int per_decade) {
    // Midpoint rule in log time over [1e-4, 1].
    const int m = 4 * per_decade;
    double acc = 0.0;
    for (int j = 0; j < m; ++j) {
      const double a = std::pow(10.0, -4.0 + 4.0 * j / m);
      const double b = std::pow(10.0, -4.0 + 4.0 * (j + 1) / m);
      const double s = std::sqrt(a * b);
      const double nrm = weighted_norm(op.apply_semigroup_B(s, 1.0), op.grid());
      acc += std::pow(s, -gam) * nrm * nrm * (b - a);
    }
    return acc;
  };
  const double coarse = integral(20);
  const double fine = integral(40);
  CHECK(std::isfinite(fine));
  CHECK(std::abs(fine - coarse) <= 0.05 * fine);
}

TEST_CASE("t -> e^{tA}B is continuous") {
  const auto op = standard();
  for (double t : {0.05, 0.2, 1.0}) {
    double prev = 1e300;
    for (double delta : {1e-2, 1e-3, 1e-4, 1e-5}) {
      const double d = weighted_norm(op.apply_semigroup_B(t + delta, 1.0) - op.apply_semigroup_B(t, 1.0), op.grid());
      CHECK(d < prev);
      prev = d;
    }
    CHECK(prev <= 1e-3);
  }
}
