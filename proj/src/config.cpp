#include "halfline/config.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace halfline {

using json = nlohmann::json;

namespace {

const std::map<std::string, std::set<std::string>> kDynamicsParams{
    {"zero", {}}, {"linear", {"c"}}, {"tanh", {"amplitude"}}};
const std::map<std::string, std::set<std::string>> kCostParams{
    {"zero", {}},
    {"constant", {"c"}},
    {"quadratic_tracking", {"q", "r", "target", "window", "terminal_q", "cap"}},
    {"spectral_terminal", {"mode", "scale"}}};

class Reader {
 public:
  Reader(const json& j, std::string section) : obj_(j), section_(std::move(section)) {
    if (!obj_.is_object()) fail("", "must be an object");
  }

  void number(const char* key, double& out) {
    if (const json* v = take(key)) {
      if (!v->is_number()) fail(key, "must be a number");
      out = v->get<double>();
    }
  }
  void integer(const char* key, Index& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_integer()) fail(key, "must be an integer");
      out = Index(v->get<long long>());
    }
  }
  void integer(const char* key, int& out) {
    Index v = out;
    integer(key, v);
    out = int(v);
  }
  void boolean(const char* key, bool& out) {
    if (const json* v = take(key)) {
      if (!v->is_boolean()) fail(key, "must be true or false");
      out = v->get<bool>();
    }
  }
  void text(const char* key, std::string& out) {
    if (const json* v = take(key)) {
      if (!v->is_string()) fail(key, "must be a string");
      out = v->get<std::string>();
    }
  }
  void params(const char* key, std::map<std::string, double>& out) {
    if (const json* v = take(key)) {
      if (!v->is_object()) fail(key, "must be an object of numbers");
      out.clear();
      for (const auto& [k, x] : v->items()) {
        if (!x.is_number()) fail(key, "entry '" + k + "' must be a number");
        out[k] = x.get<double>();
      }
    }
  }
  void list(const char* key, std::vector<double>& out) {
    if (const json* v = take(key)) {
      if (!v->is_array()) fail(key, "must be an array of numbers");
      out.clear();
      for (const auto& x : *v) {
        if (!x.is_number()) fail(key, "must be an array of numbers");
        out.push_back(x.get<double>());
      }
    }
  }
  void finish() const {
    for (const auto& [k, v] : obj_.items())
      if (!seen_.count(k)) fail(k, "unknown key");
  }

 private:
  const json* take(const char* key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }
  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    std::string where = section_;
    if (!key.empty()) where += where.empty() ? key : "." + key;
    throw ConfigError("config: " + where + ": " + what);
  }

  const json& obj_;
  std::string section_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("config: " + what);
}

void check_params(const std::map<std::string, std::set<std::string>>& catalog, const std::string& section,
                  const std::string& name, const std::map<std::string, double>& params) {
  auto it = catalog.find(name);
  require(it != catalog.end(), section + ".name: unknown '" + name + "'");
  for (const auto& [k, v] : params) {
    require(it->second.count(k) > 0, section + ".params: unknown parameter '" + k + "' for " + name);
    require(std::isfinite(v), section + ".params." + k + ": must be finite");
  }
}

}  // namespace

void validate(const ExperimentConfig& c) {
  require(c.grid.xi_max > 0.0, "grid.xi_max must be positive");
  require(c.grid.n >= 2, "grid.n must be at least 2");
  require(c.grid.grading == "uniform" || c.grid.grading == "boundary_graded", "grid.grading must be uniform or boundary_graded");
  require(c.grid.theta > 0.0 && c.grid.theta < 1.0, "grid.theta must lie in (0, 1)");
  require(c.grid.weight == "capped" || c.grid.weight == "power", "grid.weight must be capped or power");
  require(c.op.lambda > 0.0, "operator.lambda must be positive");
  require(c.op.m_shift >= 0.0, "operator.m_shift must be non-negative");
  check_params(kDynamicsParams, "dynamics", c.dynamics.name, c.dynamics.params);
  require(c.dynamics.noise >= 0.0, "dynamics.noise must be non-negative");
  check_params(kCostParams, "cost", c.cost.name, c.cost.params);
  require(c.cost.u_min <= c.cost.u_max, "cost.u_min must not exceed cost.u_max");
  require(c.cost.n_grid >= 1, "cost.n_grid must be positive");
  require(c.cost.horizon > 0.0, "cost.horizon must be positive");
  require(c.dynamics.control >= c.cost.u_min && c.dynamics.control <= c.cost.u_max, "dynamics.control must lie in U");
  require(c.initial.kind == "zero" || c.initial.kind == "constant" || c.initial.kind == "steady",
          "initial.kind must be zero, constant or steady");
  require(c.solver.n_steps >= 1, "solver.n_steps must be positive");
  require(c.solver.samples >= 1000, "solver.samples must be at least 1000");
  require(c.solver.stationary_dt > 0.0, "solver.stationary_dt must be positive");
  require(c.solver.spectral_modes >= 0 && c.solver.spectral_modes <= c.grid.n, "solver.spectral_modes must lie in [0, grid.n]");
  require(c.solver.degree == 1 || c.solver.degree == 2, "solver.degree must be 1 or 2");
  require(c.solver.ridge >= 0.0, "solver.ridge must be non-negative");
  require(c.solver.max_condition > 1.0, "solver.max_condition must exceed 1");
  require(c.solver.truncation_tol > 0.0, "solver.truncation_tol must be positive");
  require(c.stationary.mu > 0.0, "stationary.mu must be positive");
  require(c.stationary.m_shift >= 0.0, "stationary.m_shift must be non-negative");
  require(c.stationary.cap >= 0.0, "stationary.cap must be non-negative");
  require(c.verify.random_states >= 1, "verify.random_states must be positive");
  require(c.verify.adversaries >= 0, "verify.adversaries must be non-negative");
  require(c.verify.probes >= 2, "verify.probes must be at least 2");
  require(c.verify.qv_paths >= 2, "verify.qv_paths must be at least 2");
  require(c.verify.fd_trials >= 1, "verify.fd_trials must be positive");
  for (double t : c.sweep.times) require(t >= 0.0 && t < c.cost.horizon, "sweep.times must lie in [0, cost.horizon)");
  for (double r : c.sweep.radii) require(r >= 0.0, "sweep.radii must be non-negative");
}

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config: top level must be an object");
  ExperimentConfig c;
  auto section = [&](const char* name, auto&& body) {
    auto it = root.find(name);
    if (it == root.end()) return;
    Reader r(*it, name);
    body(r);
    r.finish();
  };
  if (root.contains("seed")) {
    const json& s = root["seed"];
    if (!s.is_number_integer() || (!s.is_number_unsigned() && s.get<long long>() < 0))
      throw ConfigError("config: seed must be a non-negative integer");
    c.seed = s.get<std::uint64_t>();
  }
  const std::set<std::string> sections{"grid", "operator", "dynamics", "cost", "initial", "solver",
                                       "stationary", "verify", "sweep", "seed"};
  for (const auto& [k, v] : root.items())
    if (!sections.count(k)) throw ConfigError("config: " + k + ": unknown key");

  section("grid", [&](Reader& r) {
    r.number("xi_max", c.grid.xi_max);
    r.integer("n", c.grid.n);
    r.text("grading", c.grid.grading);
    r.number("theta", c.grid.theta);
    r.text("weight", c.grid.weight);
  });
  section("operator", [&](Reader& r) {
    r.number("lambda", c.op.lambda);
    r.number("m_shift", c.op.m_shift);
  });
  section("dynamics", [&](Reader& r) {
    const std::string before = c.dynamics.name;
    r.text("name", c.dynamics.name);
    if (c.dynamics.name != before) c.dynamics.params.clear();
    r.params("params", c.dynamics.params);
    r.number("noise", c.dynamics.noise);
    r.number("control", c.dynamics.control);
  });
  section("cost", [&](Reader& r) {
    const std::string before = c.cost.name;
    r.text("name", c.cost.name);
    if (c.cost.name != before) c.cost.params.clear();
    r.params("params", c.cost.params);
    r.number("u_min", c.cost.u_min);
    r.number("u_max", c.cost.u_max);
    r.integer("n_grid", c.cost.n_grid);
    r.number("horizon", c.cost.horizon);
  });
  section("initial", [&](Reader& r) {
    r.text("kind", c.initial.kind);
    r.number("value", c.initial.value);
  });
  section("solver", [&](Reader& r) {
    r.integer("n_steps", c.solver.n_steps);
    r.integer("samples", c.solver.samples);
    r.number("stationary_dt", c.solver.stationary_dt);
    r.integer("spectral_modes", c.solver.spectral_modes);
    r.boolean("boundary_feature", c.solver.boundary_feature);
    r.integer("degree", c.solver.degree);
    r.number("ridge", c.solver.ridge);
    r.number("max_condition", c.solver.max_condition);
    r.number("truncation_tol", c.solver.truncation_tol);
    r.boolean("rate_diagnostic", c.solver.rate_diagnostic);
  });
  section("stationary", [&](Reader& r) {
    r.number("mu", c.stationary.mu);
    r.number("m_shift", c.stationary.m_shift);
    r.number("cap", c.stationary.cap);
  });
  section("verify", [&](Reader& r) {
    r.integer("random_states", c.verify.random_states);
    r.integer("adversaries", c.verify.adversaries);
    r.integer("probes", c.verify.probes);
    r.integer("qv_paths", c.verify.qv_paths);
    r.integer("fd_trials", c.verify.fd_trials);
  });
  section("sweep", [&](Reader& r) {
    r.list("times", c.sweep.times);
    r.list("radii", c.sweep.radii);
  });
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string canonical_json(const ExperimentConfig& c) {
  json j;
  j["grid"] = {{"xi_max", c.grid.xi_max}, {"n", c.grid.n}, {"grading", c.grid.grading}, {"theta", c.grid.theta},
               {"weight", c.grid.weight}};
  j["operator"] = {{"lambda", c.op.lambda}, {"m_shift", c.op.m_shift}};
  j["dynamics"] = {{"name", c.dynamics.name}, {"params", c.dynamics.params}, {"noise", c.dynamics.noise},
                   {"control", c.dynamics.control}};
  j["cost"] = {{"name", c.cost.name}, {"params", c.cost.params}, {"u_min", c.cost.u_min}, {"u_max", c.cost.u_max},
               {"n_grid", c.cost.n_grid}, {"horizon", c.cost.horizon}};
  j["initial"] = {{"kind", c.initial.kind}, {"value", c.initial.value}};
  j["solver"] = {{"n_steps", c.solver.n_steps},
                 {"samples", c.solver.samples},
                 {"stationary_dt", c.solver.stationary_dt},
                 {"spectral_modes", c.solver.spectral_modes},
                 {"boundary_feature", c.solver.boundary_feature},
                 {"degree", c.solver.degree},
                 {"ridge", c.solver.ridge},
                 {"max_condition", c.solver.max_condition},
                 {"truncation_tol", c.solver.truncation_tol},
                 {"rate_diagnostic", c.solver.rate_diagnostic}};
  j["stationary"] = {{"mu", c.stationary.mu}, {"m_shift", c.stationary.m_shift}, {"cap", c.stationary.cap}};
  j["verify"] = {{"random_states", c.verify.random_states},
                 {"adversaries", c.verify.adversaries},
                 {"probes", c.verify.probes},
                 {"qv_paths", c.verify.qv_paths},
                 {"fd_trials", c.verify.fd_trials}};
  j["sweep"] = {{"times", c.sweep.times}, {"radii", c.sweep.radii}};
  j["seed"] = c.seed;
  return j.dump();
}

std::string config_hash(const ExperimentConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : canonical_json(config)) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::shared_ptr<const Operator> make_operator(const ExperimentConfig& c, double m_shift) {
  WeightSpecd w;
  w.theta = c.grid.theta;
  w.variant = c.grid.weight == "power" ? WeightVariant::PowerWeight : WeightVariant::CappedWeight;
  const Grading g = c.grid.grading == "boundary_graded" ? Grading::BoundaryGraded : Grading::Uniform;
  return std::make_shared<const Operator>(build_operator(make_grid(c.grid.xi_max, c.grid.n, g, w), c.op.lambda, m_shift));
}

Nonlinearity build_nonlinearity(const ExperimentConfig& c) {
  auto get = [&](const char* k, double fallback) {
    auto it = c.dynamics.params.find(k);
    return it == c.dynamics.params.end() ? fallback : it->second;
  };
  if (c.dynamics.name == "linear") return Nonlinearity::linear(get("c", 0.5));
  if (c.dynamics.name == "tanh") return Nonlinearity::tanh(get("amplitude", 0.5));
  return Nonlinearity::zero();
}

ControlSet build_controls(const ExperimentConfig& c) {
  ControlSet u;
  u.u_min = c.cost.u_min;
  u.u_max = c.cost.u_max;
  u.n_grid = c.cost.n_grid;
  return u;
}

ControlProblem finite_problem(const ExperimentConfig& c) {
  ControlProblem p;
  p.op = make_operator(c, c.op.m_shift);
  p.f = build_nonlinearity(c);
  p.cost = make_cost(c.cost.name, c.cost.params, *p.op);
  p.controls = build_controls(c);
  p.horizon = c.cost.horizon;
  return p;
}

ControlProblem stationary_problem(const ExperimentConfig& c) {
  ControlProblem p;
  p.op = make_operator(c, c.stationary.m_shift);
  p.f = build_nonlinearity(c);
  std::map<std::string, double> params = c.cost.params;
  if (c.cost.name == "quadratic_tracking" && !params.count("cap") && c.stationary.cap > 0.0)
    params["cap"] = c.stationary.cap;
  p.cost = make_cost(c.cost.name, params, *p.op);
  p.controls = build_controls(c);
  p.mu = c.stationary.mu;
  return p;
}

McConfig mc_config(const ExperimentConfig& c) {
  McConfig mc;
  mc.n_steps = c.solver.n_steps;
  mc.stationary_dt = c.solver.stationary_dt;
  mc.samples = c.solver.samples;
  mc.seed = c.seed;
  mc.basis.spectral_modes = c.solver.spectral_modes;
  mc.basis.boundary_feature = c.solver.boundary_feature;
  mc.basis.degree = c.solver.degree;
  mc.basis.ridge = c.solver.ridge;
  mc.basis.max_condition = c.solver.max_condition;
  mc.truncation_tol = c.solver.truncation_tol;
  mc.rate_diagnostic = c.solver.rate_diagnostic;
  return mc;
}

Eigen::VectorXd initial_state(const ExperimentConfig& c, const Operator& op) {
  if (c.initial.kind == "constant") return Eigen::VectorXd::Constant(op.size(), c.initial.value);
  if (c.initial.kind == "steady") return op.steady_state_from_boundary(c.initial.value);
  return Eigen::VectorXd::Zero(op.size());
}

}  // namespace halfline
