#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "adasgo/grid_index.hpp"
#include "adasgo/rules1d.hpp"

namespace adasgo {

/// Integrand on the reference cube [-1, 1]^d. Must be pure.
using Integrand = std::function<double(std::span<const double>)>;

inline constexpr std::size_t kDefaultMaxEvaluations = 10'000'000;

/// One accepted index of an adaptive run.
struct AdaptiveStep {
  MultiIndex index;
  double surplus = 0.0;
  double cumulative_value = 0.0;
  std::size_t cumulative_points = 0;
};

struct QuadResult {
  double value = 0.0;
  /// Distinct integrand evaluations spent.
  std::size_t point_count = 0;
  std::optional<Downset> downset;
  /// Delta_i f for every member of `downset`.
  std::map<MultiIndex, double> surplus_log;
  /// Adaptive runs only: covering elements probed and rejected (|Delta| < eps).
  std::map<MultiIndex, double> rejected;
  /// Adaptive runs only: evaluation budget hit before the exit condition.
  bool truncated = false;
  std::vector<AdaptiveStep> trace;
};

/// Memoises integrand values on tensor nodes within one quadrature call.
///
/// Nodes are keyed by the per-dimension node ids of the nested rules, which
/// identifies coordinates that coincide across levels. Throws BudgetExceeded
/// when a new evaluation would go past `max_evaluations` and NonFiniteValue
/// on inf/nan integrand values.
class EvaluationCache {
 public:
  EvaluationCache(const Integrand& f, std::size_t dim,
                  std::size_t max_evaluations = kDefaultMaxEvaluations);

  double evaluate(std::span<const std::uint32_t> ids, std::span<const double> point);
  std::size_t evaluations() const { return values_.size(); }
  std::size_t dim() const { return dim_; }

 private:
  struct KeyHash {
    std::size_t operator()(const std::vector<std::uint32_t>& k) const noexcept;
  };

  const Integrand& f_;
  std::size_t dim_;
  std::size_t max_evaluations_;
  std::vector<std::uint32_t> key_;
  std::unordered_map<std::vector<std::uint32_t>, double, KeyHash> values_;
};

/// Sum in pairwise (tree) order.
double pairwise_sum(std::span<const double> values);

/// Delta_{i_1} (x) ... (x) Delta_{i_d} f.
double tensor_surplus(RuleFamily family, const MultiIndex& index, const Integrand& f);
double tensor_surplus(RuleFamily family, const MultiIndex& index, EvaluationCache& cache);

/// Direct tensor-product rule with weights c_{l_1,j_1} ... c_{l_d,j_d}.
/// Throws BudgetExceeded if prod N_{l_k} > max_evaluations.
QuadResult product_rule(RuleFamily family, const MultiIndex& cap, const Integrand& f,
                        std::size_t max_evaluations = kDefaultMaxEvaluations);

/// Sum of surpluses over a downset, evaluating each distinct node once.
QuadResult downset_quadrature(RuleFamily family, const Downset& set, const Integrand& f,
                              std::size_t max_evaluations = kDefaultMaxEvaluations);

/// Level-l sparse grid: downset {|i|_1 <= l + d - 1}.
QuadResult classical_sparse_grid(RuleFamily family, int level, std::size_t dim,
                                 const Integrand& f,
                                 std::size_t max_evaluations = kDefaultMaxEvaluations);

/// Explicit nodes and combined (possibly negative) weights.
struct GridPointSet {
  std::size_t dim = 0;
  std::vector<std::vector<double>> points;
  std::vector<double> weights;
  std::string source;

  /// Header x_1,...,x_d,weight then one row per node.
  void write_csv(std::ostream& os) const;
};

GridPointSet product_grid(RuleFamily family, const MultiIndex& cap);
GridPointSet downset_grid(RuleFamily family, const Downset& set);
GridPointSet sparse_grid(RuleFamily family, int level, std::size_t dim);

}  // namespace adasgo
