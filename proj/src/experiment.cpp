#include "adasgo/experiment.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "adasgo/errors.hpp"

#ifndef ADASGO_GIT_HASH
#define ADASGO_GIT_HASH "unknown"
#endif

namespace adasgo {

std::string_view build_git_hash() { return ADASGO_GIT_HASH; }

const std::vector<std::string>& experiment_methods() {
  static const std::vector<std::string> names{"mc",       "sg_tra",   "sg_cc",       "sg_gp",  "dasg_tra",
                                              "dasg_cc",  "dasg_gp",  "product_tra", "dtom_mc"};
  return names;
}

namespace {

struct MethodInfo {
  QuadMethod quad;
  RuleFamily family = RuleFamily::GaussPatterson;
  bool dtom = false;
};

MethodInfo method_info(const std::string& method) {
  if (method == "mc") return {QuadMethod::MonteCarlo};
  if (method == "dtom_mc") return {QuadMethod::MonteCarlo, RuleFamily::GaussPatterson, true};
  if (method == "product_tra") return {QuadMethod::Product, RuleFamily::Trapezoidal};
  const auto underscore = method.find('_');
  if (underscore != std::string::npos) {
    const std::string kind = method.substr(0, underscore);
    const std::string fam = method.substr(underscore + 1);
    if ((kind == "sg" || kind == "dasg") && (fam == "tra" || fam == "cc" || fam == "gp")) {
      return {kind == "sg" ? QuadMethod::SparseGrid : QuadMethod::Adaptive, parse_family(fam)};
    }
  }
  throw Error(ErrorCode::UnknownMethod, "unknown method '" + method + "'");
}

// Shortest representation that round-trips.
std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

double reference_distance(const Problem& problem, const Eigen::VectorXd& u) {
  if (!problem.u_star) throw Error(ErrorCode::InvalidProblem, problem.name + " has no reference minimiser");
  const Eigen::Map<const Eigen::VectorXd> ref(problem.u_star->data(),
                                               static_cast<Eigen::Index>(problem.u_star->size()));
  return (u - ref).norm();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
  os << content;
}

}  // namespace

nlohmann::json to_json(const ExperimentSpec& spec) {
  nlohmann::json j{{"problem", spec.problem},
                   {"method", spec.method},
                   {"sweep", spec.sweep},
                   {"seed", spec.seed},
                   {"scheme", to_string(spec.scheme.mode)},
                   {"central_differences", spec.scheme.central},
                   {"shared_seed", spec.shared_seed},
                   {"level_cap", spec.level_cap},
                   {"repetitions", spec.repetitions},
                   {"max_iters", spec.max_iters},
                   {"grad_tol", spec.grad_tol}};
  j["fd_step"] = spec.scheme.fd_step ? nlohmann::json(*spec.scheme.fd_step) : nlohmann::json(nullptr);
  j["engine"] = spec.engine ? nlohmann::json(to_string(*spec.engine)) : nlohmann::json(nullptr);
  j["u0"] = spec.u0 ? nlohmann::json(*spec.u0) : nlohmann::json(nullptr);
  return j;
}

Eigen::VectorXd default_start(const Problem& problem) {
  const auto n = static_cast<Eigen::Index>(problem.dim_u);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  if (problem.u_box) {
    for (Eigen::Index q = 0; q < n; ++q) {
      const auto k = static_cast<std::size_t>(q);
      u[q] = 0.5 * (problem.u_box->lower[k] + problem.u_box->upper[k]);
    }
  }
  return u;
}

SolverConfig experiment_solver_config(const ExperimentSpec& spec, const Problem& problem, double param,
                                      std::uint64_t seed) {
  const MethodInfo info = method_info(spec.method);
  SolverConfig cfg;
  cfg.engine = spec.engine.value_or(problem.u_box ? Engine::ProjectedBFGS : Engine::BFGS);
  cfg.grad_tol = spec.grad_tol;
  cfg.max_iters = spec.max_iters;
  cfg.scheme = spec.scheme;
  cfg.shared_seed = spec.shared_seed;
  cfg.quad.method = info.quad;
  cfg.quad.family = info.family;
  cfg.quad.level_cap = spec.level_cap;
  cfg.quad.seed = seed;
  switch (info.quad) {
    case QuadMethod::Adaptive:
      if (!(param > 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be positive");
      cfg.quad.epsilon = param;
      break;
    case QuadMethod::SparseGrid:
    case QuadMethod::Product:
      if (param < 1.0 || param != std::floor(param)) {
        throw Error(ErrorCode::InvalidArgument, "level must be a positive integer");
      }
      cfg.quad.level = static_cast<int>(param);
      break;
    case QuadMethod::MonteCarlo:
      if (param < 1.0 || param != std::floor(param)) {
        throw Error(ErrorCode::InvalidArgument, "sample count must be a positive integer");
      }
      cfg.quad.samples = static_cast<std::size_t>(param);
      break;
  }
  return cfg;
}

std::vector<ResultRow> run_experiment(const ExperimentSpec& spec) {
  if (spec.sweep.empty()) throw Error(ErrorCode::InvalidArgument, "empty sweep");
  const MethodInfo info = method_info(spec.method);
  const Problem problem = problem_by_name(spec.problem);
  if (!problem.u_star || !problem.f_star) {
    throw Error(ErrorCode::InvalidProblem, problem.name + " has no reference solution");
  }
  Eigen::VectorXd u0 = default_start(problem);
  if (spec.u0) {
    if (spec.u0->size() != problem.dim_u) throw Error(ErrorCode::DimensionMismatch, "u0 has the wrong dimension");
    u0 = Eigen::Map<const Eigen::VectorXd>(spec.u0->data(), static_cast<Eigen::Index>(spec.u0->size()));
  }
  const bool monte_carlo = info.quad == QuadMethod::MonteCarlo;
  const int reps = monte_carlo ? std::max(1, spec.repetitions) : 1;

  std::vector<ResultRow> rows;
  for (const double param : spec.sweep) {
    ResultRow row;
    row.method = spec.method;
    row.param = param;
    const auto start = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) {
      const std::uint64_t seed = spec.seed + static_cast<std::uint64_t>(r);
      SolverConfig cfg = experiment_solver_config(spec, problem, param, seed);
      SolveResult res = info.dtom ? dtom_surrogate_solve(problem, u0, cfg.quad, cfg) : solve(problem, u0, cfg);
      row.avg_points += res.trace.average_points() / reps;
      row.u_error += reference_distance(problem, res.u) / reps;
      row.f_error += std::abs(res.objective - *problem.f_star) / reps;
      row.iterations += static_cast<double>(res.iterations) / reps;
      const std::string status(to_string(res.status));
      if (r == 0) {
        row.status = status;
      } else if (row.status != status) {
        row.status = "mixed";
      }
    }
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rows.push_back(std::move(row));
  }

  if (spec.out_dir) {
    std::filesystem::create_directories(*spec.out_dir);
    std::ostringstream results, timings;
    write_results_csv(results, rows);
    write_timings_csv(timings, rows);
    write_file(*spec.out_dir / "results.csv", results.str());
    write_file(*spec.out_dir / "timings.csv", timings.str());
    const nlohmann::json meta{{"git_hash", build_git_hash()}, {"seed", spec.seed}, {"config", to_json(spec)}};
    write_file(*spec.out_dir / "metadata.json", meta.dump(2) + "\n");
  }
  return rows;
}

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << "method,param,avg_points,u_error,f_error,iterations,status\n";
  for (const auto& r : rows) {
    os << r.method << ',' << format_double(r.param) << ',' << format_double(r.avg_points) << ','
       << format_double(r.u_error) << ',' << format_double(r.f_error) << ',' << format_double(r.iterations)
       << ',' << r.status << '\n';
  }
}

void write_timings_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << "method,param,wall_seconds\n";
  for (const auto& r : rows) {
    os << r.method << ',' << format_double(r.param) << ',' << format_double(r.wall_seconds) << '\n';
  }
}

// ---------------------------------------------------------------------------

namespace {

std::string family_tag(RuleFamily family) {
  switch (family) {
    case RuleFamily::Trapezoidal: return "tra";
    case RuleFamily::ClenshawCurtis: return "cc";
    case RuleFamily::GaussPatterson: return "gp";
  }
  return "unknown";
}

StoppingRun run_stopping(const Problem& problem, const StoppingStudySpec& spec, const Eigen::VectorXd& u0,
                         double epsilon, RuleFamily family) {
  SolverConfig cfg;
  cfg.engine = spec.engine;
  cfg.scheme = spec.scheme;
  cfg.max_iters = spec.max_iters;
  cfg.grad_tol = 0.0;
  cfg.quad.method = QuadMethod::Adaptive;
  cfg.quad.family = family;
  cfg.quad.epsilon = epsilon;
  cfg.trend.enabled = true;
  cfg.trend.halt = false;
  cfg.trend.patience = spec.patience;
  if (spec.probe_epsilon) {
    QuadSpec probe = cfg.quad;
    probe.epsilon = *spec.probe_epsilon;
    cfg.trend.probe = probe;
  }
  const SolveResult res = solve(problem, u0, cfg);

  QuadSpec fit_spec = cfg.quad;
  fit_spec.epsilon = epsilon / 4.0;

  StoppingRun run;
  run.epsilon = epsilon;
  run.family = family;
  std::vector<double> probes, xs, ys;
  for (const auto& rec : res.trace.records) {
    const Eigen::Map<const Eigen::VectorXd> u(rec.u.data(), static_cast<Eigen::Index>(rec.u.size()));
    StoppingRow row;
    row.iteration = rec.iteration;
    row.u_error = reference_distance(problem, u);
    row.surrogate = rec.objective;
    row.probe = rec.probe.value_or(0.0);
    const Eigen::VectorXd at = u;
    row.fit_value = expectation(problem, fit_spec, [&](std::span<const double> w) {
                      return problem.h(std::span<const double>(at.data(), problem.dim_u), w);
                    }).value;
    probes.push_back(row.probe);
    xs.push_back(row.u_error);
    ys.push_back(row.fit_value);
    run.rows.push_back(row);
  }

  const auto decision = first_trend_stop(probes, spec.patience);
  run.stop_index = decision.at_iteration;
  run.fired = decision.stop;
  // Iterates whose errors agree to difference-quotient noise count as ties.
  const double best = *std::min_element(xs.begin(), xs.end());
  while (xs[run.error_argmin] > best * (1.0 + 1e-6) + 1e-12) ++run.error_argmin;

  std::vector<double> distinct = xs;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() >= 3) run.fit = quadratic_fit(xs, ys);
  const auto [lo, hi] = std::minmax_element(ys.begin(), ys.end());
  run.fit_range = *hi - *lo;
  return run;
}

}  // namespace

std::vector<StoppingRun> stopping_study(const StoppingStudySpec& spec) {
  const Problem problem = problem_by_name(spec.problem);
  if (!problem.u_star) throw Error(ErrorCode::InvalidProblem, problem.name + " has no reference minimiser");
  Eigen::VectorXd u0 = default_start(problem);
  if (spec.u0) {
    if (spec.u0->size() != problem.dim_u) throw Error(ErrorCode::DimensionMismatch, "u0 has the wrong dimension");
    u0 = Eigen::Map<const Eigen::VectorXd>(spec.u0->data(), static_cast<Eigen::Index>(spec.u0->size()));
  }

  std::vector<StoppingRun> runs;
  for (const double eps : spec.epsilons) {
    for (const RuleFamily family : spec.families) runs.push_back(run_stopping(problem, spec, u0, eps, family));
  }

  if (spec.out_dir) {
    std::filesystem::create_directories(*spec.out_dir);
    for (const auto& run : runs) {
      std::ostringstream os;
      write_stopping_csv(os, run);
      write_file(*spec.out_dir / ("stopping_" + family_tag(run.family) + "_eps" + format_double(run.epsilon) + ".csv"),
                 os.str());
    }
    std::ostringstream summary;
    write_stopping_summary(summary, runs);
    write_file(*spec.out_dir / "stopping_summary.csv", summary.str());
  }
  return runs;
}

void write_stopping_csv(std::ostream& os, const StoppingRun& run) {
  os << "iter,u_error,surrogate,probe,fit_value\n";
  for (const auto& r : run.rows) {
    os << r.iteration << ',' << format_double(r.u_error) << ',' << format_double(r.surrogate) << ','
       << format_double(r.probe) << ',' << format_double(r.fit_value) << '\n';
  }
}

void write_stopping_summary(std::ostream& os, const std::vector<StoppingRun>& runs) {
  os << "family,epsilon,stop_index,fired,error_argmin,fit_a,fit_b,fit_c,fit_residual,fit_range\n";
  for (const auto& run : runs) {
    os << family_tag(run.family) << ',' << format_double(run.epsilon) << ',' << run.stop_index << ','
       << (run.fired ? 1 : 0) << ',' << run.error_argmin << ',';
    if (run.fit) {
      os << format_double(run.fit->a) << ',' << format_double(run.fit->b) << ',' << format_double(run.fit->c)
         << ',' << format_double(run.fit->residual);
    } else {
      os << ",,,";
    }
    os << ',' << format_double(run.fit_range) << '\n';
  }
}

}  // namespace adasgo
