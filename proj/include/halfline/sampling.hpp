#pragma once

#include <cstdint>

#include "halfline/dirichlet_heat.hpp"
#include "halfline/random.hpp"

namespace halfline {

/// Random element of H with unit weighted norm: eigen-coefficients g_k / k^decay,
/// g_k standard normal. decay = 1 is the Brownian-bridge law, whose samples stay
/// in H as the grid is refined (node-wise white noise does not).
inline Eigen::VectorXd random_state(const Operator& op, std::uint64_t seed, std::uint64_t stream, double decay = 1.0) {
  Eigen::VectorXd c = standard_normals(op.size(), seed, stream);
  for (Index k = 0; k < c.size(); ++k) c[k] /= std::pow(double(k + 1), decay);
  Eigen::VectorXd x = op.basis() * c;
  return x / weighted_norm(x, op.grid());
}

}  // namespace halfline
