#pragma once

// Truncated-halfline discretization of the weighted space
// L^2((0, inf); rho(xi) dxi), rho(xi) = xi^{1+theta} or min(xi^{1+theta}, 1).

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "halfline/errors.hpp"

namespace halfline {

using Index = Eigen::Index;

enum class WeightVariant { PowerWeight, CappedWeight };
enum class Grading { Uniform, BoundaryGraded };

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
struct WeightSpec {
  Scalar theta = Scalar(0.5);
  WeightVariant variant = WeightVariant::CappedWeight;

  void validate() const {
    if (!(theta > Scalar(0) && theta < Scalar(1)))
      throw InvalidArgument("weight theta must lie in (0,1), got " + std::to_string(double(theta)));
  }
};

template <typename Scalar>
Scalar rho(Scalar xi, const WeightSpec<Scalar>& spec) {
  using std::pow;
  if (xi < Scalar(0)) throw InvalidArgument("rho: negative xi");
  const Scalar power = pow(xi, Scalar(1) + spec.theta);
  if (spec.variant == WeightVariant::CappedWeight) return power < Scalar(1) ? power : Scalar(1);
  return power;
}

/// Interior nodes 0 < xi_1 < ... < xi_n < xi_max; zero Dirichlet values are
/// implied at both endpoints. Quadrature is the trapezoidal rule on the full
/// partition {0, xi_1, ..., xi_n, xi_max}: node i carries (xi_{i+1}-xi_{i-1})/2
/// and the two endpoint half-cells carry the (zero) boundary values.
template <typename Scalar>
class SpatialGrid {
 public:
  using Vector = VectorX<Scalar>;

  SpatialGrid(Scalar xi_max, Vector nodes, WeightSpec<Scalar> weight, Grading grading)
      : xi_max_(xi_max), nodes_(std::move(nodes)), weight_(weight), grading_(grading) {
    weight_.validate();
    const Index n = nodes_.size();
    if (!(xi_max_ > Scalar(0)) || n < 1) throw InvalidArgument("grid: need xi_max > 0 and at least one node");
    for (Index i = 0; i < n; ++i) {
      const Scalar left = i == 0 ? Scalar(0) : nodes_[i - 1];
      if (!(nodes_[i] > left) || !(nodes_[i] < xi_max_))
        throw InvalidArgument("grid: nodes must be strictly increasing inside (0, xi_max)");
    }
    quad_weights_.resize(n);
    rho_values_.resize(n);
    for (Index i = 0; i < n; ++i) {
      quad_weights_[i] = (right_node(i) - left_node(i)) / Scalar(2);
      rho_values_[i] = rho(nodes_[i], weight_);
    }
  }

  Index size() const { return nodes_.size(); }
  Scalar xi_max() const { return xi_max_; }
  const Vector& nodes() const { return nodes_; }
  const Vector& quad_weights() const { return quad_weights_; }
  const Vector& rho_values() const { return rho_values_; }
  const WeightSpec<Scalar>& weight_spec() const { return weight_; }
  Grading grading() const { return grading_; }

  /// Neighbour coordinate, with the truncation endpoints standing in at the ends.
  Scalar left_node(Index i) const { return i == 0 ? Scalar(0) : nodes_[i - 1]; }
  Scalar right_node(Index i) const { return i + 1 == size() ? xi_max_ : nodes_[i + 1]; }

  /// Half-cells at xi=0 and xi=xi_max, where the state is pinned to zero.
  Scalar endpoint_weight() const { return (nodes_[0] + (xi_max_ - nodes_[size() - 1])) / Scalar(2); }

  /// Sum of all trapezoidal weights including the endpoint half-cells; equals xi_max.
  Scalar total_weight() const { return quad_weights_.sum() + endpoint_weight(); }

  /// Per-node weights of the discrete H inner product, rho_i * w_i.
  Vector inner_weights() const { return rho_values_.cwiseProduct(quad_weights_); }

 private:
  Scalar xi_max_;
  Vector nodes_;
  Vector quad_weights_;
  Vector rho_values_;
  WeightSpec<Scalar> weight_;
  Grading grading_;
};

template <typename Scalar>
SpatialGrid<Scalar> make_grid(Scalar xi_max, Index n, Grading grading, WeightSpec<Scalar> weight = {}) {
  if (!(xi_max > Scalar(0))) throw InvalidArgument("make_grid: xi_max must be positive");
  if (n < 2) throw InvalidArgument("make_grid: need n >= 2 nodes");
  VectorX<Scalar> nodes(n);
  const Scalar denom = Scalar(n + 1);
  for (Index i = 0; i < n; ++i) {
    const Scalar s = Scalar(i + 1) / denom;
    nodes[i] = grading == Grading::Uniform ? xi_max * s : xi_max * s * s;
  }
  return SpatialGrid<Scalar>(xi_max, std::move(nodes), weight, grading);
}

template <typename DerivedU, typename DerivedV, typename Scalar>
Scalar weighted_inner(const Eigen::MatrixBase<DerivedU>& u, const Eigen::MatrixBase<DerivedV>& v,
                      const SpatialGrid<Scalar>& grid) {
  if (u.size() != grid.size() || v.size() != grid.size())
    throw InvalidArgument("weighted_inner: vector length does not match grid");
  return (u.array() * v.array() * grid.rho_values().array() * grid.quad_weights().array()).sum();
}

template <typename Derived, typename Scalar>
Scalar weighted_norm(const Eigen::MatrixBase<Derived>& v, const SpatialGrid<Scalar>& grid) {
  using std::sqrt;
  return sqrt(weighted_inner(v, v, grid));
}

/// Column-wise weighted norms of a node-by-sample ensemble matrix.
template <typename Derived, typename Scalar>
VectorX<Scalar> weighted_norms(const Eigen::MatrixBase<Derived>& states, const SpatialGrid<Scalar>& grid) {
  if (states.rows() != grid.size()) throw InvalidArgument("weighted_norms: row count does not match grid");
  const VectorX<Scalar> w = grid.inner_weights();
  return (states.array().square().colwise() * w.array()).colwise().sum().sqrt().transpose();
}

inline const char* to_string(WeightVariant v) {
  return v == WeightVariant::PowerWeight ? "power" : "capped";
}
inline const char* to_string(Grading g) { return g == Grading::Uniform ? "uniform" : "boundary_graded"; }

using WeightSpecd = WeightSpec<double>;
using Grid = SpatialGrid<double>;

}  // namespace halfline
