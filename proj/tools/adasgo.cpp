#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adasgo/adaptive.hpp"
#include "adasgo/errors.hpp"
#include "adasgo/experiment.hpp"
#include "adasgo/rules1d.hpp"
#include "adasgo/sg_quadrature.hpp"
#include "adasgo/solver.hpp"

namespace {

using namespace adasgo;

const std::map<std::string, Engine> kEngines{
    {"newton", Engine::Newton}, {"bfgs", Engine::BFGS}, {"projected-bfgs", Engine::ProjectedBFGS}};

const std::map<std::string, DerivativeMode> kSchemes{{"quad-then-diff", DerivativeMode::QuadThenDiff},
                                                     {"diff-then-quad", DerivativeMode::DiffThenQuad},
                                                     {"exact", DerivativeMode::Exact}};

struct CommonOptions {
  std::string problem = "toy";
  std::string scheme = "diff-then-quad";
  bool central = false;
  std::optional<double> fd_step;
  std::string engine;
  int max_iters = 50;
  double grad_tol = 1e-8;
  std::uint64_t seed = 0;
  std::optional<std::string> out;
  std::vector<double> u0;

  DerivativeScheme derivative_scheme() const {
    return DerivativeScheme{kSchemes.at(scheme), fd_step, central};
  }
  std::optional<Engine> engine_choice() const {
    if (engine.empty()) return std::nullopt;
    return kEngines.at(engine);
  }
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--problem", o.problem, "toy, additive[:d], lq[:d], lq-sym[:d] or a JSON file")
      ->capture_default_str();
  cmd->add_option("--scheme", o.scheme, "derivative scheme")
      ->check(CLI::IsMember({"quad-then-diff", "diff-then-quad", "exact"}))
      ->capture_default_str();
  cmd->add_flag("--central", o.central, "central difference quotients");
  cmd->add_option("--fd-step", o.fd_step, "difference step before scaling by max(1, |u|)");
  cmd->add_option("--engine", o.engine, "newton, bfgs or projected-bfgs")
      ->check(CLI::IsMember({"newton", "bfgs", "projected-bfgs"}));
  cmd->add_option("--max-iters", o.max_iters)->capture_default_str();
  cmd->add_option("--grad-tol", o.grad_tol)->capture_default_str();
  cmd->add_option("--seed", o.seed, "Monte Carlo seed")->capture_default_str();
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--u0", o.u0, "starting point")->delimiter(',');
}

ExperimentSpec make_spec(const CommonOptions& o, const std::string& method, std::vector<double> sweep,
                         int level_cap, bool shared_seed) {
  ExperimentSpec spec;
  spec.problem = o.problem;
  spec.method = method;
  spec.sweep = std::move(sweep);
  spec.seed = o.seed;
  spec.scheme = o.derivative_scheme();
  spec.shared_seed = shared_seed;
  spec.level_cap = level_cap;
  spec.engine = o.engine_choice();
  spec.max_iters = o.max_iters;
  spec.grad_tol = o.grad_tol;
  if (!o.u0.empty()) spec.u0 = o.u0;
  return spec;
}

int run_solve(const CommonOptions& o, const std::string& method, double eps, int level, std::size_t samples,
              int level_cap, bool shared_seed) {
  const Problem problem = problem_by_name(o.problem);
  const bool mc = method == "mc" || method == "dtom_mc";
  const bool grid = method.rfind("sg_", 0) == 0 || method == "product_tra";
  const double param = mc ? static_cast<double>(samples) : grid ? level : eps;
  ExperimentSpec spec = make_spec(o, method, {param}, level_cap, shared_seed);
  const SolverConfig cfg = experiment_solver_config(spec, problem, param, o.seed);
  Eigen::VectorXd u0 = default_start(problem);
  if (!o.u0.empty()) u0 = Eigen::Map<const Eigen::VectorXd>(o.u0.data(), static_cast<Eigen::Index>(o.u0.size()));

  const SolveResult res = method == "dtom_mc" ? dtom_surrogate_solve(problem, u0, cfg.quad, cfg)
                                              : solve(problem, u0, cfg);
  std::cout.precision(17);
  std::cout << "status " << to_string(res.status) << "\niterations " << res.iterations << "\nobjective "
            << res.objective << "\nu";
  for (Eigen::Index q = 0; q < res.u.size(); ++q) std::cout << ' ' << res.u[q];
  std::cout << "\naverage_points " << res.trace.average_points() << '\n';
  if (problem.u_star) {
    const Eigen::Map<const Eigen::VectorXd> ref(problem.u_star->data(),
                                                 static_cast<Eigen::Index>(problem.u_star->size()));
    std::cout << "u_error " << (res.u - ref).norm() << '\n';
  }
  if (problem.f_star) std::cout << "f_error " << std::abs(res.objective - *problem.f_star) << '\n';

  if (o.out) {
    const std::filesystem::path dir(*o.out);
    std::filesystem::create_directories(dir);
    std::ofstream jsonl(dir / "trace.jsonl");
    res.trace.write_jsonl(jsonl);
    std::ofstream csv(dir / "summary.csv");
    res.trace.write_summary_csv(csv);
    std::ofstream meta(dir / "metadata.json");
    meta << nlohmann::json{{"git_hash", build_git_hash()}, {"seed", o.seed}, {"config", to_json(spec)}}.dump(2)
         << '\n';
  }
  return 0;
}

int run_sweep(const CommonOptions& o, const std::string& method, std::vector<double> sweep,
              const std::vector<double>& eps, const std::vector<double>& samples, int level_cap, bool shared_seed,
              int repetitions) {
  if (sweep.empty()) sweep = (method == "mc" || method == "dtom_mc") ? samples : eps;
  if (sweep.empty()) throw Error(ErrorCode::InvalidArgument, "nothing to sweep; pass --sweep");
  ExperimentSpec spec = make_spec(o, method, std::move(sweep), level_cap, shared_seed);
  spec.repetitions = repetitions;
  if (o.out) spec.out_dir = *o.out;
  const auto rows = run_experiment(spec);
  write_results_csv(std::cout, rows);
  return 0;
}

int run_stopping_study(const CommonOptions& o, const std::vector<double>& eps,
                       const std::vector<std::string>& families, std::optional<double> probe_eps, int patience) {
  StoppingStudySpec spec;
  spec.problem = o.problem;
  if (!eps.empty()) spec.epsilons = eps;
  if (!families.empty()) {
    spec.families.clear();
    for (const auto& f : families) spec.families.push_back(parse_family(f));
  }
  spec.scheme = o.derivative_scheme();
  spec.engine = o.engine_choice().value_or(Engine::Newton);
  spec.max_iters = o.max_iters;
  spec.probe_epsilon = probe_eps;
  spec.patience = patience;
  if (!o.u0.empty()) spec.u0 = o.u0;
  if (o.out) spec.out_dir = *o.out;
  const auto runs = stopping_study(spec);
  write_stopping_summary(std::cout, runs);
  return 0;
}

// Quick health check of the quadrature stack.
int run_selftest() {
  int failures = 0;
  auto report = [&](const std::string& name, bool ok) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << '\n';
    failures += ok ? 0 : 1;
  };
  for (const RuleFamily family : {RuleFamily::Trapezoidal, RuleFamily::ClenshawCurtis, RuleFamily::GaussPatterson}) {
    bool ok = true;
    for (int level = 1; level <= 6; ++level) {
      const Rule1D rule = make_rule(family, level);
      const int degree = polynomial_exactness_degree(family, level);
      for (int k = 0; k <= degree; ++k) {
        double q = 0.0;
        for (std::size_t j = 0; j < rule.nodes.size(); ++j) q += rule.weights[j] * std::pow(rule.nodes[j], k);
        const double exact = k % 2 == 1 ? 0.0 : 2.0 / (k + 1);
        ok = ok && std::abs(q - exact) <= 1e-12;
      }
    }
    report("exactness " + std::string(to_string(family)), ok);
  }
  const QuadResult sg = classical_sparse_grid(RuleFamily::GaussPatterson, 3, 2, [](std::span<const double> x) {
    return x[0] * x[0] * x[1] * x[1];
  });
  report("sparse grid x^2 y^2", std::abs(sg.value - 4.0 / 9.0) <= 1e-10);
  AdaptiveConfig cfg;
  cfg.epsilon = 1e-10;
  cfg.cap = MultiIndex::filled(2, 8);
  const Problem toy = toy_problem();
  const QuadResult grad = adaptive_quadrature(
      cfg, reference_integrand(toy, [](std::span<const double> w) { return w[0] * w[0] + 10.0 * w[1] * w[1]; }));
  report("adaptive toy gradient", std::abs(grad.value - 3.0) <= 1e-8);
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic optimisation with adaptive sparse-grid quadrature"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string method = "dasg_gp";
  double eps = 1e-6;
  int level = 3;
  std::size_t samples = 100;
  int level_cap = 8;
  bool shared_seed = false;

  auto* solve_cmd = app.add_subcommand("solve", "solve one problem instance");
  add_common(solve_cmd, common);
  solve_cmd->add_option("--method", method, "quadrature method")
      ->check(CLI::IsMember(experiment_methods()))
      ->capture_default_str();
  solve_cmd->add_option("--eps", eps, "adaptive threshold")->capture_default_str();
  solve_cmd->add_option("--level", level, "sparse-grid or product level")->capture_default_str();
  solve_cmd->add_option("--samples", samples, "Monte Carlo sample count")->capture_default_str();
  solve_cmd->add_option("--level-cap", level_cap)->capture_default_str();
  solve_cmd->add_flag("--shared-seed", shared_seed, "objective and gradients share Monte Carlo samples");

  std::vector<double> sweep, sweep_eps, sweep_samples;
  int repetitions = 10;
  auto* sweep_cmd = app.add_subcommand("sweep", "run a method over a parameter sweep");
  add_common(sweep_cmd, common);
  sweep_cmd->add_option("--method", method)->check(CLI::IsMember(experiment_methods()))->capture_default_str();
  sweep_cmd->add_option("--sweep", sweep, "epsilons, levels or sample counts")->delimiter(',');
  sweep_cmd->add_option("--eps", sweep_eps, "epsilon sweep for adaptive methods")->delimiter(',');
  sweep_cmd->add_option("--samples", sweep_samples, "sample-count sweep for Monte Carlo methods")->delimiter(',');
  sweep_cmd->add_option("--level-cap", level_cap)->capture_default_str();
  sweep_cmd->add_option("--repetitions", repetitions, "Monte Carlo seeds per row")->capture_default_str();
  sweep_cmd->add_flag("--shared-seed", shared_seed);

  std::vector<double> stop_eps;
  std::vector<std::string> families;
  std::optional<double> probe_eps;
  int patience = 1;
  auto* stop_cmd = app.add_subcommand("stopping-study", "trend-monitor study over epsilons and rule families");
  add_common(stop_cmd, common);
  stop_cmd->add_option("--eps", stop_eps, "adaptive thresholds (default 1 0.1)")->delimiter(',');
  stop_cmd->add_option("--families", families, "tra, cc, gp (default all)")->delimiter(',');
  stop_cmd->add_option("--probe-eps", probe_eps, "probe threshold (default eps/4)");
  stop_cmd->add_option("--patience", patience)->capture_default_str();

  auto* selftest_cmd = app.add_subcommand("quad-selftest", "check rule exactness and basic integrals");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve_cmd) return run_solve(common, method, eps, level, samples, level_cap, shared_seed);
    if (*sweep_cmd) {
      return run_sweep(common, method, sweep, sweep_eps, sweep_samples, level_cap, shared_seed, repetitions);
    }
    if (*stop_cmd) {
      if (stop_cmd->get_option("--scheme")->count() == 0) common.scheme = "quad-then-diff";
      return run_stopping_study(common, stop_eps, families, probe_eps, patience);
    }
    if (*selftest_cmd) return run_selftest();
  } catch (const Error& e) {
    std::cerr << "error " << e.what() << '\n';
    return 2;
  }
  return 0;
}
