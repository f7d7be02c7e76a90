#include "halfline/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <set>

#include "halfline/random.hpp"

namespace halfline {

namespace {

// Nodes whose density can be nonzero.
Index active_nodes(const CostSpec& spec, const Grid& grid) {
  const auto& nodes = grid.nodes();
  return Index(std::upper_bound(nodes.data(), nodes.data() + nodes.size(), spec.support) - nodes.data());
}

template <typename Density>
Eigen::RowVectorXd integrate_columns(const Grid& grid, Index active, const Eigen::MatrixXd& x, Density&& density) {
  if (x.rows() != grid.size()) throw InvalidArgument("cost: state length does not match grid");
  Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(x.cols());
  for (Index p = 0; p < x.cols(); ++p) {
    double acc = 0.0;
    for (Index i = 0; i < active; ++i) acc += density(i, x(i, p)) * grid.quad_weights()[i];
    out[p] = acc;
  }
  return out;
}

double control_part(const CostSpec& spec, double s, double u) { return spec.control_cost ? spec.control_cost(s, u) : 0.0; }

}  // namespace

Eigen::RowVectorXd state_cost(const CostSpec& spec, const Grid& grid, double s, const Eigen::MatrixXd& x) {
  if (!spec.state_density) {
    if (x.rows() != grid.size()) throw InvalidArgument("cost: state length does not match grid");
    return Eigen::RowVectorXd::Zero(x.cols());
  }
  const auto& nodes = grid.nodes();
  return integrate_columns(grid, active_nodes(spec, grid), x,
                           [&](Index i, double y) { return spec.state_density(s, nodes[i], y); });
}

Eigen::RowVectorXd state_cost_derivative(const CostSpec& spec, const Grid& grid, double s, const Eigen::MatrixXd& x,
                                         const Eigen::MatrixXd& d) {
  if (x.rows() != grid.size() || d.rows() != grid.size() || d.cols() != x.cols())
    throw InvalidArgument("cost derivative: shape mismatch");
  Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(x.cols());
  if (!spec.state_density_dy) return out;
  const Index active = active_nodes(spec, grid);
  for (Index p = 0; p < x.cols(); ++p)
    for (Index i = 0; i < active; ++i)
      out[p] += spec.state_density_dy(s, grid.nodes()[i], x(i, p)) * grid.quad_weights()[i] * d(i, p);
  return out;
}

Eigen::RowVectorXd terminal_cost(const CostSpec& spec, const Grid& grid, const Eigen::MatrixXd& x) {
  if (!spec.terminal_density) {
    if (x.rows() != grid.size()) throw InvalidArgument("cost: state length does not match grid");
    return Eigen::RowVectorXd::Zero(x.cols());
  }
  const auto& nodes = grid.nodes();
  return integrate_columns(grid, active_nodes(spec, grid), x,
                           [&](Index i, double y) { return spec.terminal_density(nodes[i], y); });
}

Eigen::RowVectorXd terminal_cost_derivative(const CostSpec& spec, const Grid& grid, const Eigen::MatrixXd& x,
                                            const Eigen::MatrixXd& d) {
  if (x.rows() != grid.size() || d.rows() != grid.size() || d.cols() != x.cols())
    throw InvalidArgument("terminal derivative: shape mismatch");
  Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(x.cols());
  if (!spec.terminal_density_dy) return out;
  const Index active = active_nodes(spec, grid);
  for (Index p = 0; p < x.cols(); ++p)
    for (Index i = 0; i < active; ++i)
      out[p] += spec.terminal_density_dy(grid.nodes()[i], x(i, p)) * grid.quad_weights()[i] * d(i, p);
  return out;
}

Eigen::VectorXd terminal_gradient(const CostSpec& spec, const Grid& grid, const Eigen::VectorXd& x) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(grid.size());
  if (!spec.terminal_density_dy) return g;
  const Index active = active_nodes(spec, grid);
  for (Index i = 0; i < active; ++i)
    g[i] = spec.terminal_density_dy(grid.nodes()[i], x[i]) * grid.quad_weights()[i];
  return g;
}

double running_cost_L(const CostSpec& spec, const Grid& grid, const ControlSet& controls, double s,
                      const Eigen::VectorXd& x, double u) {
  if (!controls.contains(u)) throw InvalidArgument("running_cost_L: control outside U");
  return state_cost(spec, grid, s, x)[0] + control_part(spec, s, u);
}

double terminal_cost_Phi(const CostSpec& spec, const Grid& grid, const Eigen::VectorXd& x) {
  return terminal_cost(spec, grid, x)[0];
}

HamiltonianValue minimize_control(const CostSpec& spec, const ControlSet& controls, double s, double z) {
  controls.validate();
  auto objective = [&](double u) { return z * u + control_part(spec, s, u); };
  const long n = controls.u_min == controls.u_max ? 1 : controls.n_grid;
  const double step = n > 1 ? (controls.u_max - controls.u_min) / double(n - 1) : 0.0;
  auto candidate = [&](long k) { return k == n - 1 ? controls.u_max : controls.u_min + step * double(k); };

  long best_k = 0;
  double best = objective(candidate(0));
  std::vector<double> values(static_cast<std::size_t>(n));
  values[0] = best;
  for (long k = 1; k < n; ++k) {
    values[std::size_t(k)] = objective(candidate(k));
    if (values[std::size_t(k)] < best) {
      best = values[std::size_t(k)];
      best_k = k;
    }
  }
  HamiltonianValue out{best, candidate(best_k)};
  if (!controls.refine || n < 2) return out;
  // Refine only around a strict grid minimum; at an edge the bracket is the edge cell.
  const bool left_ok = best_k == 0 || values[std::size_t(best_k - 1)] > best;
  const bool right_ok = best_k == n - 1 || values[std::size_t(best_k + 1)] > best;
  if (!left_ok || !right_ok) return out;

  // Locally unimodal bracket: golden section, then one parabolic polish.
  double a = candidate(std::max(best_k - 1, 0L));
  double b = candidate(std::min(best_k + 1, n - 1));
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - ratio * (b - a);
  double d = a + ratio * (b - a);
  double fc = objective(c);
  double fd = objective(d);
  for (int it = 0; it < 200 && (b - a) > 1e-7 * (controls.u_max - controls.u_min); ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - ratio * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + ratio * (b - a);
      fd = objective(d);
    }
  }
  const double fa = objective(a);
  const double fb = objective(b);
  double u_star = fc <= fd ? c : d;
  double f_star = std::min(fc, fd);
  // Vertex of the parabola through (a, fa), (u*, f*), (b, fb).
  const double num = (u_star - a) * (u_star - a) * (f_star - fb) - (u_star - b) * (u_star - b) * (f_star - fa);
  const double den = 2.0 * ((u_star - a) * (f_star - fb) - (u_star - b) * (f_star - fa));
  if (den != 0.0) {
    const double vertex = u_star - num / den;
    if (vertex > a && vertex < b) {
      const double fv = objective(vertex);
      if (fv < f_star) {
        u_star = vertex;
        f_star = fv;
      }
    }
  }
  if (f_star < out.psi) out = {f_star, controls.clamp(u_star)};
  return out;
}

HamiltonianValue hamiltonian(const CostSpec& spec, const Grid& grid, const ControlSet& controls, double s,
                             const Eigen::VectorXd& x, double z) {
  HamiltonianValue h = minimize_control(spec, controls, s, z);
  h.psi += state_cost(spec, grid, s, x)[0];
  return h;
}

double hamiltonian_bound(const CostSpec& spec, const ControlSet& controls, double s) {
  if (!std::isfinite(spec.state_cost_max) || !std::isfinite(spec.state_cost_min))
    return std::numeric_limits<double>::infinity();
  const double h0 = minimize_control(spec, controls, s, 0.0).psi;
  return std::max(std::abs(spec.state_cost_min + h0), std::abs(spec.state_cost_max + h0));
}

LipschitzReport lipschitz_in_z_check(const CostSpec& spec, const Grid& grid, const ControlSet& controls,
                                     long samples, std::uint64_t seed, double tol) {
  auto engine = make_stream(seed, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> time(0.0, 1.0);
  LipschitzReport report;
  report.bound = controls.bound();
  for (long k = 0; k < samples; ++k) {
    const double s = time(engine);
    Eigen::VectorXd x(grid.size());
    for (Index i = 0; i < x.size(); ++i) x[i] = normal(engine);
    const double z1 = 3.0 * normal(engine);
    const double z2 = 3.0 * normal(engine);
    if (z1 == z2) continue;
    const double p1 = hamiltonian(spec, grid, controls, s, x, z1).psi;
    const double p2 = hamiltonian(spec, grid, controls, s, x, z2).psi;
    report.fitted_constant = std::max(report.fitted_constant, std::abs(p1 - p2) / std::abs(z1 - z2));
  }
  report.pass = report.fitted_constant <= report.bound + tol;
  return report;
}

GrowthReport check_growth(const CostSpec& spec, const Grid& grid, long samples, std::uint64_t seed) {
  auto engine = make_stream(seed, 0);
  std::uniform_int_distribution<Index> node(0, grid.size() - 1);
  std::normal_distribution<double> value(0.0, 3.0);
  std::uniform_real_distribution<double> time(0.0, 1.0);
  GrowthReport report;
  const auto& g = spec.growth;
  auto bound = [&](Index i, double y1, double y2) {
    const double xi = grid.nodes()[i];
    const double r = grid.rho_values()[i];
    const double dy = std::abs(y1 - y2);
    return g.c1 * std::sqrt(r) / std::pow(1.0 + xi, 0.5 + g.eps) * dy + g.c2 * r * (std::abs(y1) + std::abs(y2)) * dy;
  };
  for (long k = 0; k < samples; ++k) {
    const Index i = node(engine);
    const double xi = grid.nodes()[i];
    const double y1 = value(engine);
    const double y2 = value(engine);
    const double s = time(engine);
    const double b = bound(i, y1, y2);
    auto update = [&](double diff) {
      if (diff == 0.0) return;
      report.worst_ratio = std::max(report.worst_ratio, b > 0.0 ? diff / b : std::numeric_limits<double>::infinity());
    };
    if (spec.state_density) update(std::abs(spec.state_density(s, xi, y1) - spec.state_density(s, xi, y2)));
    if (spec.terminal_density) update(std::abs(spec.terminal_density(xi, y1) - spec.terminal_density(xi, y2)));
  }
  report.pass = report.worst_ratio <= 1.0 + 1e-9;
  return report;
}

namespace {

double param(const std::map<std::string, double>& params, const std::string& key, double fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

void require_known(const std::map<std::string, double>& params, std::initializer_list<const char*> known,
                   const std::string& name) {
  std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, value] : params)
    if (!allowed.count(key)) throw InvalidArgument("cost '" + name + "': unknown parameter '" + key + "'");
}

CostSpec quadratic_tracking(const std::map<std::string, double>& params, const Operator& op) {
  const double q = param(params, "q", 1.0);
  const double r = param(params, "r", 1.0);
  const double target = param(params, "target", 0.5);
  const double window = param(params, "window", 2.0);
  const double terminal_q = param(params, "terminal_q", 1.0);
  const double cap = param(params, "cap", 0.0);
  if (q < 0.0 || r < 0.0 || terminal_q < 0.0 || cap < 0.0 || !(window > 0.0))
    throw InvalidArgument("quadratic_tracking: weights must be non-negative and window positive");
  const WeightSpecd weight = op.grid().weight_spec();

  CostSpec c;
  c.name = "quadratic_tracking";
  c.support = window;
  auto w = [weight, window](double xi) { return xi <= window ? rho(xi, weight) : 0.0; };
  if (cap > 0.0) {
    c.state_density = [=](double, double xi, double y) {
      const double d = y - target;
      return q * w(xi) * cap * std::tanh(d * d / cap);
    };
    c.state_density_dy = [=](double, double xi, double y) {
      const double d = y - target;
      const double sech = 1.0 / std::cosh(d * d / cap);
      return q * w(xi) * 2.0 * d * sech * sech;
    };
  } else {
    c.state_density = [=](double, double xi, double y) { return q * w(xi) * (y - target) * (y - target); };
    c.state_density_dy = [=](double, double xi, double y) { return 2.0 * q * w(xi) * (y - target); };
  }
  if (terminal_q > 0.0) {
    c.terminal_density = [=](double xi, double y) { return terminal_q * w(xi) * (y - target) * (y - target); };
    c.terminal_density_dy = [=](double xi, double y) { return 2.0 * terminal_q * w(xi) * (y - target); };
  }
  if (r > 0.0) c.control_cost = [r](double, double u) { return r * u * u; };

  double window_mass = 0.0;
  for (Index i = 0; i < op.size(); ++i)
    if (op.grid().nodes()[i] <= window) window_mass += op.grid().rho_values()[i] * op.grid().quad_weights()[i];
  c.state_cost_min = 0.0;
  c.state_cost_max = cap > 0.0 ? q * cap * window_mass : std::numeric_limits<double>::infinity();
  const double qmax = std::max(q, terminal_q);
  c.growth = {2.0 * qmax * std::abs(target) * std::pow(1.0 + window, 0.6), qmax, 0.1};
  return c;
}

CostSpec spectral_terminal(const std::map<std::string, double>& params, const Operator& op) {
  const double mode_value = param(params, "mode", 0.0);
  const double scale = param(params, "scale", 1.0);
  const Index mode = Index(mode_value);
  if (mode < 0 || mode >= op.size() || double(mode) != mode_value)
    throw InvalidArgument("spectral_terminal: mode must be an integer in [0, n)");
  const Grid& grid = op.grid();
  // Density g(xi_i) y with g(xi_i) w_i = scale * e_mode[i]; linear in between nodes.
  auto nodes = std::make_shared<Eigen::VectorXd>(grid.nodes());
  auto g = std::make_shared<Eigen::VectorXd>(scale * op.spectral_functional(mode).transpose().cwiseQuotient(grid.quad_weights()));
  auto lookup = [nodes, g](double xi) {
    const auto& x = *nodes;
    const Index n = x.size();
    if (xi <= x[0]) return (*g)[0];
    if (xi >= x[n - 1]) return (*g)[n - 1];
    const Index k = Index(std::upper_bound(x.data(), x.data() + n, xi) - x.data());
    const double t = (xi - x[k - 1]) / (x[k] - x[k - 1]);
    return (1.0 - t) * (*g)[k - 1] + t * (*g)[k];
  };
  CostSpec c;
  c.name = "spectral_terminal";
  c.terminal_density = [lookup](double xi, double y) { return lookup(xi) * y; };
  c.terminal_density_dy = [lookup](double xi, double) { return lookup(xi); };
  double c1 = 0.0;
  for (Index i = 0; i < grid.size(); ++i)
    c1 = std::max(c1, std::abs((*g)[i]) * std::pow(1.0 + grid.nodes()[i], 0.6) / std::sqrt(grid.rho_values()[i]));
  c.growth = {c1 * (1.0 + 1e-12), 0.0, 0.1};
  return c;
}

}  // namespace

CostSpec make_cost(const std::string& name, const std::map<std::string, double>& params, const Operator& op) {
  if (name == "zero") {
    require_known(params, {}, name);
    return CostSpec{};
  }
  if (name == "constant") {
    require_known(params, {"c"}, name);
    const double value = param(params, "c", 1.0);
    CostSpec c;
    c.name = "constant";
    c.control_cost = [value](double, double) { return value; };
    return c;
  }
  if (name == "quadratic_tracking") {
    require_known(params, {"q", "r", "target", "window", "terminal_q", "cap"}, name);
    return quadratic_tracking(params, op);
  }
  if (name == "spectral_terminal") {
    require_known(params, {"mode", "scale"}, name);
    return spectral_terminal(params, op);
  }
  throw InvalidArgument("unknown cost '" + name + "'");
}

}  // namespace halfline
