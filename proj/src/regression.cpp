#include "halfline/regression.hpp"

#include <cmath>
#include <sstream>

#include "halfline/stats.hpp"

namespace halfline {

void BasisConfig::validate() const {
  if (spectral_modes < 0) throw InvalidArgument("basis: spectral_modes must be non-negative");
  if (raw_size() < 1) throw InvalidArgument("basis: need at least one feature");
  if (degree < 1 || degree > 2) throw InvalidArgument("basis: degree must be 1 or 2");
  if (!(ridge >= 0.0)) throw InvalidArgument("basis: ridge must be non-negative");
}

Index BasisConfig::basis_size() const {
  const Index d = raw_size();
  return 1 + d + (degree == 2 ? d * (d + 1) / 2 : 0);
}

FeatureMap::FeatureMap(const Operator& op, const BasisConfig& config) {
  config.validate();
  if (config.spectral_modes > op.size()) throw InvalidArgument("basis: more spectral modes than grid nodes");
  map_.resize(config.raw_size(), op.size());
  for (Index k = 0; k < config.spectral_modes; ++k) map_.row(k) = op.spectral_functional(k);
  if (config.boundary_feature)
    map_.row(config.spectral_modes) =
        op.dirichlet_profile().cwiseProduct(op.grid().inner_weights()).transpose();
}

Eigen::MatrixXd LinearModel::expand(const Eigen::MatrixXd& features) const {
  const Index d = Index(kept_.size());
  const Index q = centers_.size();
  Eigen::MatrixXd basis(features.cols(), q);
  if (q == 0) return basis;
  Eigen::MatrixXd u(d, features.cols());
  for (Index j = 0; j < d; ++j)
    u.row(j) = (features.row(kept_[std::size_t(j)]).array() - shift_[j]) / scale_[j];
  Index col = 0;
  for (Index j = 0; j < d; ++j) basis.col(col++) = u.row(j).transpose();
  if (degree_ == 2)
    for (Index j = 0; j < d; ++j)
      for (Index l = j; l < d; ++l) basis.col(col++) = u.row(j).cwiseProduct(u.row(l)).transpose();
  return basis;
}

LinearModel LinearModel::fit(const Eigen::MatrixXd& features, const Eigen::Ref<const Eigen::VectorXd>& target,
                             const BasisConfig& config) {
  const Index samples = features.cols();
  if (target.size() != samples) throw InvalidArgument("regression: one target per sample required");
  const Index raw = features.rows();
  const Index full = 1 + raw + (config.degree == 2 ? raw * (raw + 1) / 2 : 0);
  if (samples < 10 * full) {
    std::ostringstream os;
    os << "regression: " << full << " basis functions need at least " << 10 * full << " samples, got " << samples;
    throw InvalidArgument(os.str());
  }
  LinearModel m;
  m.degree_ = config.degree;
  m.mean_target_ = mean(target);

  std::vector<double> shift, scale;
  for (Index j = 0; j < features.rows(); ++j) {
    const Eigen::VectorXd row = features.row(j).transpose();
    const double mu = mean(row);
    const double sd = std::sqrt(sample_variance(row));
    if (sd > 1e-12 * (1.0 + std::abs(mu))) {
      m.kept_.push_back(j);
      shift.push_back(mu);
      scale.push_back(sd);
    }
  }
  const Index d = Index(m.kept_.size());
  m.shift_ = Eigen::Map<Eigen::VectorXd>(shift.data(), d);
  m.scale_ = Eigen::Map<Eigen::VectorXd>(scale.data(), d);
  const Index q = d + (config.degree == 2 ? d * (d + 1) / 2 : 0);
  m.centers_ = Eigen::VectorXd::Zero(q);
  m.beta_ = Eigen::VectorXd::Zero(q);
  if (q == 0) return m;

  Eigen::MatrixXd basis = m.expand(features);
  for (Index c = 0; c < q; ++c) {
    m.centers_[c] = mean(basis.col(c));
    basis.col(c).array() -= m.centers_[c];
  }
  const Eigen::VectorXd centered = target.array() - m.mean_target_;
  Eigen::MatrixXd gram = basis.transpose() * basis / double(samples);
  gram.diagonal().array() += config.ridge;
  const Eigen::VectorXd rhs = basis.transpose() * centered / double(samples);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) throw NumericalFailure("regression: eigen-decomposition of the Gram matrix failed");
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  m.condition_ = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(m.condition_ <= config.max_condition)) {
    std::ostringstream os;
    os << "regression: Gram matrix condition estimate " << m.condition_ << " exceeds " << config.max_condition;
    throw NumericalFailure(os.str());
  }
  m.beta_ = eig.eigenvectors() * (eig.eigenvectors().transpose() * rhs).cwiseQuotient(eig.eigenvalues());
  return m;
}

Eigen::VectorXd LinearModel::predict(const Eigen::MatrixXd& features) const {
  Eigen::VectorXd out = Eigen::VectorXd::Constant(features.cols(), mean_target_);
  if (centers_.size() == 0) return out;
  const Eigen::MatrixXd basis = expand(features);
  out.noalias() += basis * beta_;
  out.array() -= centers_.dot(beta_);
  return out;
}

}  // namespace halfline
