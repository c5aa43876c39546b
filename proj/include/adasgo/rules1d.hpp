#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string_view>
#include <vector>

namespace adasgo {

/// Nested univariate quadrature families on [-1, 1].
enum class RuleFamily { Trapezoidal, ClenshawCurtis, GaussPatterson };

std::string_view to_string(RuleFamily family);

/// Accepts "tra"/"trapezoidal", "cc"/"clenshaw-curtis", "gp"/"gauss-patterson".
RuleFamily parse_family(std::string_view name);

/// Highest level a family supports. Gauss-Patterson is tabulated to level 8.
int max_level(RuleFamily family);

/// Number of nodes N_i of the level-i rule.
std::size_t num_points(RuleFamily family, int level);

struct Rule1D {
  RuleFamily family = RuleFamily::GaussPatterson;
  int level = 1;
  std::vector<double> nodes;    // ascending
  std::vector<double> weights;

  double apply(const std::function<double(double)>& f) const;
};

/// Weights b_{i,j} of the difference rule Q_i - Q_{i-1} on the level-i nodes.
///
/// `node_ids` labels every node with an id that is stable across levels
/// (a node shared with a coarser level keeps the id it got when it first
/// appeared), so multivariate evaluations can be cached across surpluses.
struct SurplusRule1D {
  RuleFamily family = RuleFamily::GaussPatterson;
  int level = 1;
  std::vector<double> nodes;
  std::vector<double> weights;
  std::vector<std::uint32_t> node_ids;

  double apply(const std::function<double(double)>& f) const;
};

/// Throws Error(UnsupportedLevel) outside [1, max_level(family)].
Rule1D make_rule(RuleFamily family, int level);

SurplusRule1D make_surplus(RuleFamily family, int level);

/// Shared, immutable surplus rule (cached per family and level).
std::shared_ptr<const SurplusRule1D> surplus_rule(RuleFamily family, int level);

/// Guaranteed degree of polynomial exactness used by the test suite:
/// trapezoidal 1, Clenshaw-Curtis N-1, Gauss-Patterson floor((3N-1)/2).
int polynomial_exactness_degree(RuleFamily family, int level);

}  // namespace adasgo
