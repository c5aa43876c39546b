#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "adasgo/adaptive.hpp"
#include "adasgo/problems.hpp"
#include "adasgo/stopping.hpp"

namespace adasgo {

// ---------------------------------------------------------------------------
// Quadrature selection

enum class QuadMethod { Adaptive, SparseGrid, Product, MonteCarlo };

std::string_view to_string(QuadMethod method);

/// How one expectation E[g(W)] is discretised.
struct QuadSpec {
  QuadMethod method = QuadMethod::Adaptive;
  RuleFamily family = RuleFamily::GaussPatterson;
  /// Adaptive surplus threshold.
  double epsilon = 1e-6;
  /// Sparse-grid level, or product-rule level in every dimension.
  int level = 3;
  /// Adaptive cap level in every dimension (clamped to the family maximum).
  int level_cap = 8;
  std::size_t samples = 100;
  std::uint64_t seed = 0;
  /// Monte Carlo: false freezes one sample set for every call (a fixed
  /// surrogate); true draws a new set per stream.
  bool fresh_samples = true;
  std::size_t max_evaluations = default_max_evaluations();
};

/// E[g(W)] under the problem's density. `stream` selects the Monte Carlo
/// sample set and is ignored by grid methods.
QuadResult expectation(const Problem& problem, const QuadSpec& spec,
                       const std::function<double(std::span<const double>)>& g,
                       std::uint64_t stream = 0);

// ---------------------------------------------------------------------------
// Derivatives

enum class DerivativeMode {
  /// Difference quotients of quadrature values (each value its own run).
  QuadThenDiff,
  /// Quadrature of the difference quotients of h, one run per component.
  DiffThenQuad,
  /// Quadrature of the problem's analytic gradient of h in u.
  Exact,
};

std::string_view to_string(DerivativeMode mode);
DerivativeMode parse_derivative_mode(std::string_view name);

struct DerivativeScheme {
  DerivativeMode mode = DerivativeMode::DiffThenQuad;
  /// Overrides the default steps (sqrt(eps), eps^(1/3) central, eps^(1/4)
  /// second order), still scaled by max(1, |u_q|).
  std::optional<double> fd_step;
  bool central = false;
};

struct GradientEstimate {
  Eigen::VectorXd value;
  std::size_t points = 0;
  std::size_t quad_calls = 0;
  /// Downset of each component's quadrature (adaptive runs only).
  std::vector<std::optional<Downset>> downsets;
  /// Some step was flipped backward to stay inside the box.
  bool step_flipped = false;
};

inline constexpr double kSingularKappa = 1e12;

struct HessianEstimate {
  Eigen::MatrixXd value;
  std::size_t points = 0;
  std::size_t quad_calls = 0;
  /// Spectral condition number of the symmetrised estimate.
  double kappa = 1.0;
  bool step_flipped = false;

  bool singular() const { return !(kappa <= kSingularKappa); }
};

/// `components`, when non-empty, gives one QuadSpec per gradient component.
GradientEstimate estimate_gradient(const Problem& problem, const Eigen::VectorXd& u,
                                   const DerivativeScheme& scheme, const QuadSpec& quad,
                                   std::uint64_t stream = 0,
                                   const std::vector<QuadSpec>& components = {});

/// Forward-forward second differences (first differences of the analytic
/// gradient in Exact mode), symmetrised. `kappa` above kSingularKappa marks
/// the estimate singular; the Newton engine turns that into SingularHessian.
HessianEstimate estimate_hessian(const Problem& problem, const Eigen::VectorXd& u,
                                 const DerivativeScheme& scheme, const QuadSpec& quad,
                                 std::uint64_t stream = 0,
                                 const std::map<std::pair<int, int>, QuadSpec>& components = {});

/// Spectral condition number of a symmetric matrix (inf if singular).
double condition_number(const Eigen::MatrixXd& symmetric);

// ---------------------------------------------------------------------------
// Line search

struct WolfeParams {
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_evaluations = 30;
};

struct LineSearchResult {
  double alpha = 0.0;
  double phi = 0.0;
  double dphi = 0.0;
  int evaluations = 0;
  bool success = false;
};

/// phi(alpha) -> (value, derivative).
using LineFunction = std::function<std::pair<double, double>(double)>;

/// Bracketing and zoom phases with safeguarded quadratic interpolation.
LineSearchResult strong_wolfe_search(const LineFunction& phi, double phi0, double dphi0,
                                     const WolfeParams& params, double alpha0 = 1.0);

/// Halving until phi(alpha) <= phi0 + c1 alpha dphi0.
LineSearchResult armijo_backtracking(const std::function<double(double)>& phi, double phi0,
                                     double dphi0, double c1, int max_evaluations = 50);

/// Minimiser of the quadratic through phi(0), phi'(0), phi(1); exact for
/// quadratic objectives. Returns nullopt without positive curvature.
std::optional<double> quadratic_exact_step(double phi0, double dphi0, double phi1);

// ---------------------------------------------------------------------------
// Solvers

enum class Engine { Newton, BFGS, ProjectedBFGS };
enum class LineSearchKind { StrongWolfe, ExactQuadratic };
enum class SolveStatus {
  Converged,
  MaxIterations,
  TrendStop,
  NoProgress,
  SingularHessian,
  LineSearchFailed,
};

std::string_view to_string(Engine engine);
std::string_view to_string(SolveStatus status);

struct TrendConfig {
  bool enabled = false;
  /// Probe quadrature; defaults to the objective's with epsilon / 4.
  std::optional<QuadSpec> probe;
  int patience = 1;
  /// Return the best iterate as soon as the monitor fires.
  bool halt = true;
};

struct SolverConfig {
  Engine engine = Engine::BFGS;
  double grad_tol = 1e-8;
  int max_iters = 50;
  /// Objective quadrature, also the default for derivatives.
  QuadSpec quad;
  std::optional<QuadSpec> gradient_quad;
  std::optional<QuadSpec> hessian_quad;
  /// Per gradient component / Hessian entry (i <= j) overrides.
  std::vector<QuadSpec> gradient_components;
  std::map<std::pair<int, int>, QuadSpec> hessian_components;
  /// Per-iteration schedule applied to every QuadSpec; identity if empty.
  std::function<QuadSpec(int iteration, const QuadSpec& base)> schedule;
  DerivativeScheme scheme;
  LineSearchKind line_search = LineSearchKind::StrongWolfe;
  WolfeParams wolfe;
  /// Objective and gradients read the same Monte Carlo samples.
  bool shared_seed = false;
  TrendConfig trend;
  /// Keep the full downset of every gradient component in the trace.
  bool record_downsets = false;
};

struct IterationRecord {
  int iteration = 0;
  std::vector<double> u;
  std::vector<double> gradient;
  double grad_norm = 0.0;
  /// Surrogate objective F_p(u_p).
  double objective = 0.0;
  std::optional<double> probe;
  double kappa = 1.0;
  /// Newton: Hessian estimate. BFGS: inverse approximation H_p. Row-major.
  std::vector<double> matrix;
  /// Evaluations spent since the previous record.
  std::size_t points = 0;
  std::size_t quad_calls = 0;
  std::size_t objective_points = 0;
  /// Trend probe cost, kept out of `points`.
  std::size_t probe_points = 0;
  std::vector<std::size_t> gradient_downset_sizes;
  std::vector<nlohmann::json> gradient_downsets;
  int line_search_evaluations = 0;
  double step_length = 0.0;
  bool armijo_fallback = false;
  bool update_skipped = false;
  bool step_flipped = false;
  bool trend_stop = false;
};

struct SolverTrace {
  std::vector<IterationRecord> records;

  std::size_t total_points() const;
  std::size_t total_quad_calls() const;
  /// Average evaluations per quadrature call.
  double average_points() const;

  void write_jsonl(std::ostream& os) const;
  /// Header iter,grad_norm,objective,points,kappa.
  void write_summary_csv(std::ostream& os) const;
};

nlohmann::json to_json(const IterationRecord& record);

struct SolveResult {
  Eigen::VectorXd u;
  double objective = 0.0;
  SolveStatus status = SolveStatus::MaxIterations;
  int iterations = 0;
  /// Iterate chosen by the trend monitor, when it fired.
  std::optional<int> stop_iteration;
  SolverTrace trace;
};

Eigen::VectorXd projected_step(const Eigen::VectorXd& u, const BoxBounds& box);

/// Newton iteration with quadrature-estimated gradient and Hessian.
SolveResult newton_solve(const Problem& problem, const Eigen::VectorXd& u0, const SolverConfig& cfg);

/// BFGS on the inverse Hessian with a strong Wolfe (or exact quadratic)
/// line search on the surrogate objective.
SolveResult bfgs_solve(const Problem& problem, const Eigen::VectorXd& u0, const SolverConfig& cfg);

/// BFGS restricted to the free variables of a box, projected Armijo search.
SolveResult projected_bfgs_solve(const Problem& problem, const Eigen::VectorXd& u0,
                                 const SolverConfig& cfg);

/// Dispatches on cfg.engine.
SolveResult solve(const Problem& problem, const Eigen::VectorXd& u0, const SolverConfig& cfg);

/// Minimises the fixed surrogate S(u) = Q(f(u, .)) with BFGS, gradients by
/// central differences of S. Monte Carlo rules are frozen to one sample set.
SolveResult dtom_surrogate_solve(const Problem& problem, const Eigen::VectorXd& u0,
                                 QuadSpec fixed_quadrature, SolverConfig cfg = {});

}  // namespace adasgo
