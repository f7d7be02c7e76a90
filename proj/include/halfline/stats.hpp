#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>

namespace halfline {

/// Point estimate with its Monte Carlo half-width (one standard error).
struct Estimate {
  double value = 0.0;
  double half_width = 0.0;
};

/// Pairwise (tree) summation; the result does not depend on how the input was produced.
inline double pairwise_sum(std::span<const double> x) {
  if (x.size() <= 8) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  }
  const auto mid = x.size() / 2;
  return pairwise_sum(x.first(mid)) + pairwise_sum(x.subspan(mid));
}

inline double mean(const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() == 0) return 0.0;
  return pairwise_sum({x.data(), static_cast<std::size_t>(x.size())}) / double(x.size());
}

inline double sample_variance(const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  const Eigen::VectorXd d = (x.array() - m).square().matrix();
  return pairwise_sum({d.data(), static_cast<std::size_t>(d.size())}) / double(x.size() - 1);
}

inline Estimate mean_estimate(const Eigen::Ref<const Eigen::VectorXd>& x) {
  return {mean(x), std::sqrt(sample_variance(x) / double(x.size()))};
}

/// Half-width of a difference of two independent estimates.
inline double combined_half_width(double a, double b) { return std::sqrt(a * a + b * b); }

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y) {
  const Eigen::ArrayXd lx = x.array().log();
  const Eigen::ArrayXd ly = y.array().log();
  const double mx = lx.mean();
  const double my = ly.mean();
  return ((lx - mx) * (ly - my)).sum() / (lx - mx).square().sum();
}

}  // namespace halfline
