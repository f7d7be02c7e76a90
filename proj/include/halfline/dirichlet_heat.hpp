#pragma once

// Discrete Dirichlet Laplacian on the truncated halfline and everything built
// from its spectral decomposition: the semigroup, fractional powers of
// (lambda - A + M), the Dirichlet map and the boundary operator.

#include <Eigen/Dense>

#include <cmath>
#include <sstream>

#include "halfline/errors.hpp"
#include "halfline/weighted_space.hpp"

namespace halfline {

/// Three-point second difference with zero values at xi=0 and xi=xi_max.
/// On graded grids the stencil is not symmetric, but W A is (W = quadrature
/// weights), so the decomposition runs on S = W^{1/2} A W^{-1/2}:
///   A = V diag(-mu) V^{-1},  V = W^{-1/2} Q,  V^{-1} = Q^T W^{1/2},
/// with Q orthonormal. On uniform grids W = h I and Q diagonalizes A itself.
template <typename Scalar>
class DirichletOperator {
 public:
  using Vector = VectorX<Scalar>;
  using Matrix = MatrixX<Scalar>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

  DirichletOperator(SpatialGrid<Scalar> grid, Scalar lambda_shift, Scalar m_shift = Scalar(0))
      : grid_(std::move(grid)), lambda_(lambda_shift), m_shift_(m_shift) {
    using std::sqrt;
    if (!(lambda_ > Scalar(0))) throw InvalidArgument("build_operator: lambda must be positive");
    if (!(m_shift_ >= Scalar(0))) throw InvalidArgument("build_operator: M shift must be non-negative");
    const Index n = grid_.size();
    lower_.setZero(n);
    diag_.setZero(n);
    upper_.setZero(n);
    for (Index i = 0; i < n; ++i) {
      const Scalar hl = grid_.nodes()[i] - grid_.left_node(i);
      const Scalar hr = grid_.right_node(i) - grid_.nodes()[i];
      lower_[i] = Scalar(2) / (hl * (hl + hr));
      upper_[i] = Scalar(2) / (hr * (hl + hr));
      diag_[i] = -Scalar(2) / (hl * hr);
    }
    sqrt_w_ = grid_.quad_weights().cwiseSqrt();

    // S = W^{1/2} A W^{-1/2}; -S has diagonal -diag_ and off-diagonal -1/(h_i sqrt(w_i w_{i+1})).
    Vector s_diag = -diag_;
    Vector s_sub(n > 1 ? n - 1 : 0);
    for (Index i = 0; i + 1 < n; ++i) s_sub[i] = -upper_[i] * sqrt_w_[i] / sqrt_w_[i + 1];
    Eigen::SelfAdjointEigenSolver<Matrix> solver;
    solver.computeFromTridiagonal(s_diag, s_sub, Eigen::ComputeEigenvectors);
    if (solver.info() != Eigen::Success) {
      std::ostringstream os;
      os << "build_operator: tridiagonal eigensolver failed (n=" << n << ", xi_max=" << double(grid_.xi_max())
         << ", grading=" << to_string(grid_.grading()) << ")";
      throw NumericalFailure(os.str());
    }
    mu_ = solver.eigenvalues();
    q_ = solver.eigenvectors();
    for (Index k = 0; k < n; ++k)
      if (q_.col(k).sum() < Scalar(0)) q_.col(k) = -q_.col(k);
    if (!(mu_.minCoeff() > Scalar(0))) throw NumericalFailure("build_operator: non-positive eigenvalue of -A");

    basis_ = sqrt_w_.cwiseInverse().asDiagonal() * q_;
    cobasis_ = q_.transpose() * sqrt_w_.asDiagonal();
    psi_.resize(n);
    for (Index i = 0; i < n; ++i) psi_[i] = std::exp(-lambda_ * grid_.nodes()[i]);
    psi_coeffs_ = cobasis_ * psi_;
  }

  const SpatialGrid<Scalar>& grid() const { return grid_; }
  Index size() const { return grid_.size(); }
  Scalar lambda() const { return lambda_; }
  Scalar m_shift() const { return m_shift_; }

  /// Eigenvalues mu_k of -A, ascending (no M shift).
  const Vector& eigenvalues() const { return mu_; }
  /// Eigenvalues of -(A - M I).
  Vector shifted_eigenvalues() const { return mu_.array() + m_shift_; }
  /// Orthonormal eigenvectors of the symmetrized operator (columns).
  const Matrix& eigenvectors() const { return q_; }
  /// Right eigenvectors of A (columns of V) and the matching left ones (rows of V^{-1}).
  const Matrix& basis() const { return basis_; }
  const Matrix& cobasis() const { return cobasis_; }

  /// Row vector e_k with e_k . x equal to the k-th spectral coordinate of x.
  RowVector spectral_functional(Index k) const { return cobasis_.row(k); }

  template <typename Derived>
  Matrix to_spectral(const Eigen::MatrixBase<Derived>& x) const {
    check_rows(x.rows());
    return cobasis_ * x;
  }
  template <typename Derived>
  Matrix from_spectral(const Eigen::MatrixBase<Derived>& c) const {
    check_rows(c.rows());
    return basis_ * c;
  }

  /// V diag(multiplier) V^{-1} x, column-wise.
  template <typename Derived>
  Matrix apply_spectral(const Vector& multiplier, const Eigen::MatrixBase<Derived>& x) const {
    check_rows(x.rows());
    return basis_ * (multiplier.asDiagonal() * (cobasis_ * x));
  }

  /// Dense matrix V diag(multiplier) V^{-1}.
  Matrix spectral_matrix(const Vector& multiplier) const { return basis_ * multiplier.asDiagonal() * cobasis_; }

  /// A x by the tridiagonal stencil (no spectral round trip, no shift).
  template <typename Derived>
  Matrix apply_matrix(const Eigen::MatrixBase<Derived>& x) const {
    check_rows(x.rows());
    const Index n = size();
    Matrix out = diag_.asDiagonal() * x;
    if (n > 1) {
      out.bottomRows(n - 1) += lower_.tail(n - 1).asDiagonal() * x.topRows(n - 1);
      out.topRows(n - 1) += upper_.head(n - 1).asDiagonal() * x.bottomRows(n - 1);
    }
    return out;
  }

  Matrix dense_matrix() const {
    const Index n = size();
    Matrix a = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
      a(i, i) = diag_[i];
      if (i > 0) a(i, i - 1) = lower_[i];
      if (i + 1 < n) a(i, i + 1) = upper_[i];
    }
    return a;
  }

  Vector semigroup_multiplier(Scalar t) const {
    if (t < Scalar(0)) throw InvalidArgument("semigroup: negative time");
    return (-(mu_.array() + m_shift_) * t).exp().matrix();
  }

  /// e^{t(A - M)} x.
  template <typename Derived>
  Matrix semigroup_apply(Scalar t, const Eigen::MatrixBase<Derived>& x) const {
    return apply_spectral(semigroup_multiplier(t), x);
  }

  /// Dense propagator e^{t(A - M)}.
  Matrix propagator(Scalar t) const { return spectral_matrix(semigroup_multiplier(t)); }

  Vector fractional_multiplier(Scalar alpha) const {
    return (mu_.array() + (lambda_ + m_shift_)).pow(alpha).matrix();
  }

  /// (lambda - A + M)^alpha x; negative alpha gives the smoothing inverse powers.
  template <typename Derived>
  Matrix fractional_apply(Scalar alpha, const Eigen::MatrixBase<Derived>& x) const {
    return apply_spectral(fractional_multiplier(alpha), x);
  }

  /// D_lambda a: the lifting a * exp(-lambda xi) at the nodes.
  Vector dirichlet_map(Scalar a) const { return a * psi_; }
  const Vector& dirichlet_profile() const { return psi_; }
  /// Spectral coordinates of exp(-lambda xi).
  const Vector& dirichlet_coefficients() const { return psi_coeffs_; }

  /// Spectral coefficients of e^{t(A-M)} B, B = (lambda - A) D_lambda.
  Vector boundary_response_coefficients(Scalar t) const {
    if (!(t > Scalar(0))) throw InvalidArgument("apply_semigroup_B: requires t > 0 (e^{tA}B blows up like t^{beta-1})");
    return ((mu_.array() + lambda_) * (-(mu_.array() + m_shift_) * t).exp() * psi_coeffs_.array()).matrix();
  }

  /// e^{t(A-M)} (lambda - A) D_lambda a.
  Vector apply_semigroup_B(Scalar t, Scalar a) const {
    return basis_ * (a * boundary_response_coefficients(t));
  }

  /// (1/h) int_0^h e^{r(A-M)} B dr: the exact response to boundary data held
  /// constant over one step of length h, per unit boundary value.
  Vector boundary_step_average(Scalar h) const {
    if (!(h > Scalar(0))) throw InvalidArgument("boundary_step_average: step must be positive");
    Vector c(size());
    for (Index k = 0; k < size(); ++k) {
      const Scalar rate = mu_[k] + m_shift_;
      const Scalar x = rate * h;
      const Scalar phi1 = x < Scalar(1e-8) ? Scalar(1) - x / Scalar(2) : -std::expm1(-x) / x;
      c[k] = (mu_[k] + lambda_) * phi1 * psi_coeffs_[k];
    }
    return basis_ * c;
  }

  /// -(A - M)^{-1} B a: the stationary profile for constant boundary value a.
  Vector steady_state_from_boundary(Scalar a) const {
    const Vector mult = ((mu_.array() + lambda_) / (mu_.array() + m_shift_)).matrix();
    return basis_ * (a * mult.cwiseProduct(psi_coeffs_));
  }

 private:
  void check_rows(Index rows) const {
    if (rows != size()) throw InvalidArgument("operator: state length does not match grid");
  }

  SpatialGrid<Scalar> grid_;
  Scalar lambda_;
  Scalar m_shift_;
  Vector lower_, diag_, upper_;
  Vector sqrt_w_;
  Vector mu_;
  Matrix q_;
  Matrix basis_, cobasis_;
  Vector psi_, psi_coeffs_;
};

template <typename Scalar>
DirichletOperator<Scalar> build_operator(SpatialGrid<Scalar> grid, Scalar lambda_shift, Scalar m_shift = Scalar(0)) {
  return DirichletOperator<Scalar>(std::move(grid), lambda_shift, m_shift);
}

/// Halfline boundary heat kernel xi / (sqrt(4 pi) t^{3/2}) exp(-xi^2 / 4t).
template <typename Scalar>
Scalar boundary_heat_kernel(Scalar t, Scalar xi) {
  using std::exp;
  using std::sqrt;
  const Scalar pi = Scalar(3.14159265358979323846264338327950288L);
  return xi / (sqrt(Scalar(4) * pi) * t * sqrt(t)) * exp(-xi * xi / (Scalar(4) * t));
}

using Operator = DirichletOperator<double>;

}  // namespace halfline
