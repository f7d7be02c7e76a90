#include "halfline/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <optional>
#include <ostream>

#include "halfline/artifacts.hpp"
#include "halfline/config.hpp"
#include "halfline/hjb_control.hpp"
#include "halfline/sampling.hpp"
#include "halfline/verify.hpp"

#ifndef HALFLINE_VERSION
#define HALFLINE_VERSION "0.0.0"
#endif

namespace halfline {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct Options {
  std::string config_path;
  int threads = 0;
  std::string out = "runs";
  std::string mode = "finite";
  std::string suite = "all";
};

std::string eigen_version() {
  return std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
         std::to_string(EIGEN_MINOR_VERSION);
}

class Run {
 public:
  Run(std::string command, ExperimentConfig config, const fs::path& root)
      : command_(std::move(command)), config_(std::move(config)), hash_(config_hash(config_)) {
    started_ = utc_timestamp();
    dir_ = make_run_directory(root, command_, hash_);
    write("config.json", canonical_json(config_) + "\n");
  }

  const ExperimentConfig& config() const { return config_; }
  const fs::path& dir() const { return dir_; }
  void set(const std::string& key, json value) { extra_[key] = std::move(value); }
  void timing(const std::string& key, double seconds) { timings_[key] = seconds; }

  void write(const std::string& name, const std::string& text) {
    write_text(dir_ / name, text);
    artifacts_.push_back(name);
  }
  void write_json(const std::string& name, const json& doc) { write(name, doc.dump(2) + "\n"); }

  void check(const std::string& name, double measured, const std::string& relation, double bound, bool pass) {
    checks_.push_back({{"name", name}, {"measured", measured}, {"relation", relation}, {"bound", bound}, {"pass", pass}});
    all_pass_ = all_pass_ && pass;
  }
  bool all_pass() const { return all_pass_; }

  /// Writes manifest.json and run_info.json; returns the exit code.
  int finish(int code, const std::string& error = {}) {
    static const char* status[] = {"pass", "property_failure", "config_error", "numerical_failure"};
    std::vector<std::string> files = artifacts_;
    std::sort(files.begin(), files.end());
    json m;
    m["command"] = command_;
    for (const auto& [k, v] : extra_.items()) m[k] = v;
    m["config_hash"] = hash_;
    m["seed"] = config_.seed;
    m["versions"] = {{"halfline", HALFLINE_VERSION},
                     {"eigen", eigen_version()},
                     {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                           std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                     {"compiler", __VERSION__}};
    m["artifacts"] = files;
    m["checks"] = checks_;
    m["status"] = status[code];
    if (!error.empty()) m["error"] = error;
    write_text(dir_ / "manifest.json", m.dump(2) + "\n");

    json info;
    info["start_utc"] = started_;
    info["end_utc"] = utc_timestamp();
    info["directory"] = dir_.string();
    info["seconds"] = timings_;
    write_text(dir_ / "run_info.json", info.dump(2) + "\n");
    return code;
  }

 private:
  std::string command_;
  ExperimentConfig config_;
  std::string hash_;
  std::string started_;
  fs::path dir_;
  json extra_ = json::object();
  json checks_ = json::array();
  json timings_ = json::object();
  std::vector<std::string> artifacts_;
  bool all_pass_ = true;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void simulate_forward(Run& run, std::ostream& out) {
  const ExperimentConfig& cfg = run.config();
  const auto op = make_operator(cfg, cfg.op.m_shift);
  const Nonlinearity f = build_nonlinearity(cfg);
  const Eigen::VectorXd x0 = initial_state(cfg, *op);
  const Index steps = cfg.solver.n_steps;
  const double dt = cfg.cost.horizon / double(steps);
  const Eigen::MatrixXd dw = cfg.dynamics.noise * sample_increments(steps, dt, cfg.solver.samples, cfg.seed);
  const double u = cfg.dynamics.control;
  ControlPolicy policy;
  if (u != 0.0) policy = [u](Index, double, const Eigen::MatrixXd&, Eigen::Ref<Eigen::RowVectorXd> row) { row.setConstant(u); };
  const ForwardStepper stepper(*op, f, dt);

  const ForwardEnsemble path = simulate_ensemble(stepper, x0, 0.0, dw.col(0), policy, {}, true);
  CsvWriter traj({"step", "t", "xi", "x"});
  for (Index i = 0; i <= steps; ++i)
    for (Index j = 0; j < op->size(); ++j)
      traj.add_row(std::vector<double>{double(i), path.time(i), op->grid().nodes()[j], path.states[std::size_t(i)](j, 0)});
  run.write("trajectory.csv", traj.str());

  const ForwardEnsemble ens = simulate_ensemble(stepper, x0, 0.0, dw, policy);
  const Eigen::VectorXd norms = weighted_norms(ens.final_state, op->grid());
  const Estimate sq = mean_estimate(norms.array().square().matrix());
  const Estimate nm = mean_estimate(norms);
  json moments;
  moments["horizon_t"] = cfg.cost.horizon;
  moments["n_steps"] = steps;
  moments["samples"] = cfg.solver.samples;
  moments["mean_sq_weighted_norm_at_horizon"] = sq.value;
  moments["mean_sq_weighted_norm_at_horizon_half_width"] = sq.half_width;
  moments["mean_weighted_norm_at_horizon"] = nm.value;
  moments["mean_weighted_norm_at_horizon_half_width"] = nm.half_width;
  moments["mean_boundary_control"] = u;
  run.write_json("moments.json", moments);
  out << "E|X_T|^2 = " << format_number(sq.value) << " +- " << format_number(sq.half_width) << "\n";

  if (cfg.dynamics.noise == 0.0 && f.is_zero() && u == 0.0) {
    double worst = 0.0;
    for (Index i = 0; i <= steps; ++i)
      worst = std::max(worst, weighted_norm(Eigen::VectorXd(path.state(i) - op->semigroup_apply(path.time(i), x0)), op->grid()));
    const double bound = 1e-10 * (1.0 + weighted_norm(x0, op->grid()));
    run.check("noise_free_semigroup_deviation", worst, "<=", bound, worst <= bound);
  }
}

void solve(Run& run, const std::string& mode, std::ostream& out) {
  const ExperimentConfig& cfg = run.config();
  const bool stationary = mode == "stationary";
  ControlProblem problem = stationary ? stationary_problem(cfg) : finite_problem(cfg);
  const Eigen::VectorXd x0 = initial_state(cfg, *problem.op);
  const ValueFunction vf(std::move(problem), mc_config(cfg), x0);
  const BsdeSolution& sol = vf.solution();
  const Estimate v = vf.value();

  json summary;
  summary["mode"] = mode;
  summary["value"] = v.value;
  summary["value_half_width"] = v.half_width;
  summary["samples"] = vf.mc().samples;
  summary["n_steps"] = vf.n_steps();
  summary["dt_t"] = vf.dt();
  if (stationary) {
    const double m = psi_bound(vf.problem());
    summary["discount_mu_per_t"] = vf.problem().mu;
    summary["truncation_horizon_t"] = sol.n_truncation;
    summary["psi_bound"] = m;
    summary["rate_diagnostic"] = sol.rate_diagnostic;
    summary["rate_bound"] = sol.rate_bound;
    summary["rate_warning"] = sol.rate_warning;
    const double sup = sol.v_values.cwiseAbs().maxCoeff();
    const double bound = m / vf.problem().mu + 3.0 * v.half_width;
    run.check("sup_abs_value_bound", sup, "<=", bound, sup <= bound);
    if (vf.mc().rate_diagnostic)
      run.check("truncation_rate", sol.rate_diagnostic, "<=", sol.rate_bound, !sol.rate_warning);
  } else {
    summary["horizon_t"] = vf.problem().horizon;
  }
  run.write_json("summary.json", summary);

  const Eigen::MatrixXd diag = bsde_diagnostics(sol);
  CsvWriter rows({"t", "mean_y", "sd_y", "mean_z", "sd_z", "condition"});
  for (Index i = 0; i < diag.rows(); ++i) {
    std::vector<double> r(std::size_t(diag.cols()));
    for (Index j = 0; j < diag.cols(); ++j) r[std::size_t(j)] = diag(i, j);
    rows.add_row(r);
  }
  run.write("bsde_diagnostics.csv", rows.str());

  const MarkovReport markov = markov_identification(vf, 0.1, cfg.seed);
  run.check("markov_rms_over_y_range", markov.ratio, "<=", 0.05, markov.ratio <= 0.05);
  const MildResidual mild = mild_residual(vf, cfg.verify.probes);
  run.check("mild_residual", mild.residual, "<=", 3.0 * mild.combined_half_width + 1e-13 * (1.0 + std::abs(mild.lhs.value)), mild.pass());
  out << "v = " << format_number(v.value) << " +- " << format_number(v.half_width) << "\n";
}

void verify(Run& run, Suite suite, std::ostream& out) {
  VerifyContext ctx(run.config());
  CsvWriter csv({"criterion_id", "criterion", "check", "measured", "relation", "bound", "pass"});
  for (int id : suite_criteria(suite)) {
    const CriterionResult r = run_criterion(id, ctx);
    for (const CheckResult& c : r.checks) {
      run.check(r.name + "." + c.name, c.measured, c.relation, c.bound, c.pass);
      csv.add_row(std::vector<std::string>{std::to_string(id), r.name, c.name, format_number(c.measured), c.relation,
                                           format_number(c.bound), c.pass ? "true" : "false"});
    }
    run.timing(r.name, r.seconds);
    out << (r.pass() ? "PASS " : "FAIL ") << id << " " << r.name << "\n";
  }
  run.write("verify_results.csv", csv.str());
}

void sweep(Run& run, std::ostream& out) {
  const ExperimentConfig& cfg = run.config();
  const ControlProblem problem = finite_problem(cfg);
  const McConfig mc = mc_config(cfg);
  const Eigen::VectorXd direction = random_state(*problem.op, cfg.seed, 0);
  CsvWriter csv({"t", "probe", "radius", "weighted_norm", "v", "half_width"});
  json growth = json::array();
  for (double t : cfg.sweep.times) {
    Eigen::VectorXd norms(Index(cfg.sweep.radii.size())), values(norms.size());
    for (std::size_t p = 0; p < cfg.sweep.radii.size(); ++p) {
      const Eigen::VectorXd x = cfg.sweep.radii[p] * direction;
      const Estimate v = ValueFunction(problem, mc, x, t).value();
      norms[Index(p)] = weighted_norm(x, problem.grid());
      values[Index(p)] = v.value;
      csv.add_row(std::vector<double>{t, double(p), cfg.sweep.radii[p], norms[Index(p)], v.value, v.half_width});
    }
    const double c = fit_growth_constant(norms, values, 2.0);
    growth.push_back({{"t", t}, {"growth_constant", c}});
    out << "t = " << format_number(t) << ": |v| <= C (1 + |x|)^2 with C = " << format_number(c) << "\n";
  }
  run.write("sweep.csv", csv.str());
  run.write_json("sweep_summary.json", {{"growth_power", 2.0}, {"growth_constants", growth}});
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Boundary-controlled stochastic heat equation on the halfline: simulation, BSDE solver and checks"};
  app.require_subcommand(1);
  Options opt;
  std::uint64_t seed = 0;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "experiment configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the configured seed");
    sub->add_option("--threads", opt.threads, "thread cap for linear algebra (0: library default)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--out", opt.out, "root directory for run outputs")->capture_default_str();
  };
  CLI::App* sim = app.add_subcommand("simulate-forward", "simulate the state equation; trajectory CSV and moments JSON");
  CLI::App* sol = app.add_subcommand("solve", "solve the control problem through its BSDE");
  CLI::App* ver = app.add_subcommand("verify", "run an acceptance suite");
  CLI::App* swp = app.add_subcommand("sweep", "value function over the configured times and radii");
  for (CLI::App* sub : {sim, sol, ver, swp}) common(sub);
  sol->add_option("--mode", opt.mode, "finite or stationary")
      ->check(CLI::IsMember({"finite", "stationary"}))
      ->capture_default_str();
  ver->add_option("suite", opt.suite, "semigroup | forward | bsde | hjb | control | all")
      ->check(CLI::IsMember({"semigroup", "forward", "bsde", "hjb", "control", "all"}))
      ->required();

  std::vector<std::string> args;
  for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitPass : kExitConfigError;
  }

  ExperimentConfig cfg;
  try {
    cfg = load_config(opt.config_path);
    CLI::App* used = app.get_subcommands().front();
    if (used->count("--seed") > 0) cfg.seed = seed;
    validate(cfg);
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }
  if (opt.threads > 0) Eigen::setNbThreads(opt.threads);

  const CLI::App* used = app.get_subcommands().front();
  const std::string command = used->get_name();
  std::optional<Run> run;
  try {
    run.emplace(command, cfg, fs::path(opt.out));
  } catch (const std::exception& e) {
    err << "cannot create the run directory: " << e.what() << "\n";
    return kExitConfigError;
  }
  out << "run directory: " << run->dir().string() << "\n";

  const auto start = std::chrono::steady_clock::now();
  try {
    if (used == sim) {
      simulate_forward(*run, out);
    } else if (used == sol) {
      run->set("mode", opt.mode);
      solve(*run, opt.mode, out);
    } else if (used == ver) {
      run->set("suite", opt.suite);
      verify(*run, parse_suite(opt.suite), out);
    } else {
      sweep(*run, out);
    }
  } catch (const NumericalFailure& e) {
    err << "numerical failure: " << e.what() << "\n";
    return run->finish(kExitNumericalFailure, e.what());
  } catch (const ConvergenceFailure& e) {
    err << "convergence failure: " << e.what() << "\n";
    return run->finish(kExitNumericalFailure, e.what());
  } catch (const PropertyFailure& e) {
    err << "property failure: " << e.what() << "\n";
    return run->finish(kExitPropertyFailure, e.what());
  } catch (const InvalidArgument& e) {
    err << "invalid argument: " << e.what() << "\n";
    return run->finish(kExitConfigError, e.what());
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << "\n";
    return run->finish(kExitNumericalFailure, e.what());
  }
  run->timing("total", seconds_since(start));
  const int code = run->all_pass() ? kExitPass : kExitPropertyFailure;
  out << (code == kExitPass ? "all checks passed" : "some checks failed") << "\n";
  return run->finish(code);
}

}  // namespace halfline
