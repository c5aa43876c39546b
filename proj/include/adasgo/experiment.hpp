#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "adasgo/solver.hpp"

namespace adasgo {

/// Git revision the library was built from ("unknown" outside a checkout).
std::string_view build_git_hash();

/// Known method names: mc, sg_tra, sg_cc, sg_gp, dasg_tra, dasg_cc,
/// dasg_gp, product_tra, dtom_mc.
const std::vector<std::string>& experiment_methods();

struct ExperimentSpec {
  /// Name accepted by problem_by_name.
  std::string problem = "toy";
  std::string method = "dasg_gp";
  /// Epsilons (dasg_*), levels (sg_*, product_tra) or sample counts (mc, dtom_mc).
  std::vector<double> sweep;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> out_dir;
  DerivativeScheme scheme;
  bool shared_seed = false;
  int level_cap = 8;
  /// Seeds averaged by the Monte Carlo methods.
  int repetitions = 10;
  /// Defaults to ProjectedBFGS with a box, BFGS otherwise.
  std::optional<Engine> engine;
  int max_iters = 50;
  double grad_tol = 1e-8;
  /// Defaults to the box midpoint, or zero without a box.
  std::optional<std::vector<double>> u0;
};

nlohmann::json to_json(const ExperimentSpec& spec);

struct ResultRow {
  std::string method;
  double param = 0.0;
  /// Integrand evaluations per quadrature call, averaged over the solve.
  double avg_points = 0.0;
  double u_error = 0.0;
  double f_error = 0.0;
  double iterations = 0.0;
  double wall_seconds = 0.0;
  std::string status;
};

/// One row per sweep value. Monte Carlo rows are means over
/// `repetitions` seeds (seed, seed + 1, ...). When out_dir is set, writes
/// results.csv, timings.csv and metadata.json there.
std::vector<ResultRow> run_experiment(const ExperimentSpec& spec);

/// Header method,param,avg_points,u_error,f_error,iterations,status.
/// Wall time is kept out so equal specs give identical files.
void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows);
void write_timings_csv(std::ostream& os, const std::vector<ResultRow>& rows);

/// Builds the solver configuration used for one sweep value and seed.
SolverConfig experiment_solver_config(const ExperimentSpec& spec, const Problem& problem, double param,
                                      std::uint64_t seed);

/// Starting point used when spec.u0 is empty.
Eigen::VectorXd default_start(const Problem& problem);

// ---------------------------------------------------------------------------

struct StoppingStudySpec {
  std::string problem = "toy";
  std::vector<double> epsilons{1.0, 0.1};
  std::vector<RuleFamily> families{RuleFamily::Trapezoidal, RuleFamily::ClenshawCurtis,
                                   RuleFamily::GaussPatterson};
  Engine engine = Engine::Newton;
  DerivativeScheme scheme{DerivativeMode::QuadThenDiff, std::nullopt, false};
  int max_iters = 8;
  /// Trend probe threshold; epsilon / 4 when empty.
  std::optional<double> probe_epsilon;
  int patience = 1;
  std::optional<std::vector<double>> u0;
  std::optional<std::filesystem::path> out_dir;
};

struct StoppingRow {
  int iteration = 0;
  double u_error = 0.0;
  double surrogate = 0.0;
  double probe = 0.0;
  /// Objective at epsilon / 4, the quadratic-fit ordinate.
  double fit_value = 0.0;
};

struct StoppingRun {
  double epsilon = 0.0;
  RuleFamily family = RuleFamily::GaussPatterson;
  std::vector<StoppingRow> rows;
  /// Iterate chosen by the trend monitor (best probe if it never fired).
  std::size_t stop_index = 0;
  bool fired = false;
  /// First iterate whose true error is within a relative 1e-6 of the smallest.
  std::size_t error_argmin = 0;
  /// Absent with fewer than three distinct abscissae.
  std::optional<QuadraticFit> fit;
  double fit_range = 0.0;
};

/// Runs every (epsilon, family) pair with the trend monitor attached but
/// not halting, so the whole iteration history is visible. With out_dir,
/// writes stopping_<family>_eps<epsilon>.csv per run and stopping_summary.csv.
std::vector<StoppingRun> stopping_study(const StoppingStudySpec& spec);

void write_stopping_csv(std::ostream& os, const StoppingRun& run);
void write_stopping_summary(std::ostream& os, const std::vector<StoppingRun>& runs);

}  // namespace adasgo
