#pragma once

#include <algorithm>
#include <cmath>

#include "halfline/errors.hpp"

namespace halfline {

/// Admissible control values U = [u_min, u_max] and how the Hamiltonian searches it.
struct ControlSet {
  double u_min = -1.0;
  double u_max = 1.0;
  long n_grid = 41;
  bool refine = true;

  void validate() const {
    if (!(u_min <= u_max)) throw InvalidArgument("control set: u_min must not exceed u_max");
    if (n_grid < 1) throw InvalidArgument("control set: n_grid must be positive");
  }
  bool contains(double u) const { return u >= u_min && u <= u_max; }
  double clamp(double u) const { return std::clamp(u, u_min, u_max); }
  /// C_U = sup |u| over U.
  double bound() const { return std::max(std::abs(u_min), std::abs(u_max)); }
};

}  // namespace halfline
