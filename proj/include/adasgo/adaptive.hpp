#pragma once

#include <cstddef>
#include <optional>
#include <utility>

#include <nlohmann/json.hpp>

#include "adasgo/grid_index.hpp"
#include "adasgo/rules1d.hpp"
#include "adasgo/sg_quadrature.hpp"

namespace adasgo {

/// Evaluation budget: ADASGO_MAX_EVALS if set to a positive integer, else 10^7.
std::size_t default_max_evaluations();

struct AdaptiveConfig {
  double epsilon = 1e-6;
  MultiIndex cap;
  RuleFamily family = RuleFamily::GaussPatterson;
  std::size_t max_evaluations = default_max_evaluations();
};

/// Dimension-adaptive sparse grid quadrature.
///
/// Starts from I = {(1,...,1)}, keeps the surpluses of all covering elements
/// within the cap in a max-heap keyed by |surplus| (ties: lexicographically
/// smallest index) and moves the top into I while it is >= epsilon. Indices
/// probed below epsilon are kept in `rejected` and never re-evaluated.
/// Hitting the evaluation budget stops early with `truncated` set.
QuadResult adaptive_quadrature(const AdaptiveConfig& cfg, const Integrand& f);

/// Ordered (index, surplus, cumulative value, cumulative points) records.
nlohmann::json trace_to_json(const QuadResult& result);

struct ErrorBoundParams {
  int r = 2;
  double gamma_r = 1.0;
  /// ||f||; estimated from the integrand when absent.
  std::optional<double> f_norm;
  /// Defaults to rho_min.
  std::optional<double> rho;
};

struct BoundBundle {
  double priori = 0.0;
  double posteriori = 0.0;
  double smoothness = 0.0;
  double rho_form = 0.0;
  double rho_min = 0.0;
  double rho_used = 0.0;
  /// |L| with 1-origin levels (prod l_k), used by every bound.
  double card_L = 0.0;
  /// |L| with 0-origin counting (prod (l_k + 1)), reported only.
  double card_L_zero_origin = 0.0;
  double card_I = 0.0;
};

/// (|L| eps, (|L| - |I|) eps).
std::pair<double, double> priori_bound(double card_L, double card_I, double epsilon);

/// gamma_r^d (1 + 2^r)^d ||f|| sum_{i in L\I} 2^{-r|i|}.
double smoothness_bound(const Downset& L, const Downset& I, const ErrorBoundParams& params);
/// Same with L the full box below `cap`, summed in closed form.
double smoothness_bound(const MultiIndex& cap, const Downset& I, const ErrorBoundParams& params);

struct RhoBound {
  double bound = 0.0;
  double rho_min = 0.0;
};

/// (eps / rho) sum_{i in L\I} 2^{r(|m| - |i|)} with m of minimal |.|_1 in
/// L\I; rho_min = sum / (|L| - |I|). Empty difference gives zeros.
RhoBound rho_bound(const Downset& L, const Downset& I, double epsilon, int r,
                   std::optional<double> rho = std::nullopt);
RhoBound rho_bound(const MultiIndex& cap, const Downset& I, double epsilon, int r,
                   std::optional<double> rho = std::nullopt);

/// max |f| over the level-2 classical sparse grid.
double estimate_f_norm(RuleFamily family, std::size_t dim, const Integrand& f);

/// All four bounds for an adaptive result with L = full box below cfg.cap.
/// `f` is only used to estimate ||f|| when params.f_norm is absent.
BoundBundle compute_bounds(const QuadResult& result, const AdaptiveConfig& cfg,
                           const ErrorBoundParams& params, const Integrand* f = nullptr);

}  // namespace adasgo
