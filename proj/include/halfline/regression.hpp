#pragma once

// Least-squares estimates of conditional expectations given the state, on a
// small feature set: the first K spectral coordinates and the boundary
// functional <x, psi_lambda>_H, expanded into polynomials of degree <= 2.

#include <Eigen/Dense>

#include <vector>

#include "halfline/dirichlet_heat.hpp"

namespace halfline {

struct BasisConfig {
  Index spectral_modes = 6;
  bool boundary_feature = true;
  int degree = 2;
  double ridge = 1e-8;
  /// Fits whose regularized Gram matrix is worse conditioned than this throw.
  double max_condition = 1e14;

  void validate() const;
  /// Raw features per state (before the polynomial expansion).
  Index raw_size() const { return spectral_modes + (boundary_feature ? 1 : 0); }
  /// Polynomial basis size including the constant.
  Index basis_size() const;
};

/// Linear map from states to raw features, one row per feature.
class FeatureMap {
 public:
  FeatureMap(const Operator& op, const BasisConfig& config);

  const Eigen::MatrixXd& matrix() const { return map_; }
  Index size() const { return map_.rows(); }
  /// d x samples features of an n x samples ensemble.
  Eigen::MatrixXd operator()(const Eigen::MatrixXd& states) const { return map_ * states; }

 private:
  Eigen::MatrixXd map_;
};

/// y ~ mean(y) + (phi(r) - mean phi) beta, where phi is the degree <= 2
/// expansion of the standardized raw features r. Raw features with no spread
/// in the sample are dropped, so a fit on identical states is the sample mean.
class LinearModel {
 public:
  LinearModel() = default;

  /// features: d x samples, target: one value per sample.
  static LinearModel fit(const Eigen::MatrixXd& features, const Eigen::Ref<const Eigen::VectorXd>& target,
                         const BasisConfig& config);

  Eigen::VectorXd predict(const Eigen::MatrixXd& features) const;
  double intercept() const { return mean_target_; }
  double condition() const { return condition_; }
  Index active_raw() const { return Index(kept_.size()); }
  Index basis_size() const { return centers_.size(); }

 private:
  Eigen::MatrixXd expand(const Eigen::MatrixXd& features) const;

  int degree_ = 2;
  std::vector<Index> kept_;
  Eigen::VectorXd shift_, scale_;
  Eigen::VectorXd centers_;
  Eigen::VectorXd beta_;
  double mean_target_ = 0.0;
  double condition_ = 1.0;
};

}  // namespace halfline
