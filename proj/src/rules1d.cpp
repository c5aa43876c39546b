#include "adasgo/rules1d.hpp"

#include <array>
#include <cmath>
#include <mutex>
#include <numbers>
#include <span>
#include <string>

#include "adasgo/errors.hpp"

namespace adasgo {

namespace {

#include "patterson_table.inc"

// Trapezoidal and Clenshaw-Curtis both double their interval count per level;
// level 14 already has 8193 nodes per direction.
constexpr int kMaxDyadicLevel = 14;
constexpr int kMaxPattersonLevel = 8;

// Nodes closer than this are treated as the same node across levels.
constexpr double kNodeMatchTol = 1e-15;

void check_level(RuleFamily family, int level) {
  if (level < 1 || level > max_level(family)) {
    throw Error(ErrorCode::UnsupportedLevel,
                std::string(to_string(family)) + " level " + std::to_string(level) +
                    " outside [1, " + std::to_string(max_level(family)) + "]");
  }
}

Rule1D patterson_rule(int level) {
  auto fill = [](std::span<const double> x, std::span<const double> w) {
    Rule1D r;
    r.nodes.assign(x.begin(), x.end());
    r.weights.assign(w.begin(), w.end());
    return r;
  };
  switch (level) {
    case 1: return fill(kPattersonNodes1, kPattersonWeights1);
    case 2: return fill(kPattersonNodes2, kPattersonWeights2);
    case 3: return fill(kPattersonNodes3, kPattersonWeights3);
    case 4: return fill(kPattersonNodes4, kPattersonWeights4);
    case 5: return fill(kPattersonNodes5, kPattersonWeights5);
    case 6: return fill(kPattersonNodes6, kPattersonWeights6);
    case 7: return fill(kPattersonNodes7, kPattersonWeights7);
    case 8: return fill(kPattersonNodes8, kPattersonWeights8);
    default: break;
  }
  throw Error(ErrorCode::UnsupportedLevel, "Gauss-Patterson level " + std::to_string(level));
}

Rule1D trapezoidal_rule(int level) {
  Rule1D r;
  if (level == 1) {
    r.nodes = {0.0};
    r.weights = {2.0};
    return r;
  }
  const std::size_t intervals = std::size_t{1} << (level - 1);
  const double h = 2.0 / static_cast<double>(intervals);
  r.nodes.resize(intervals + 1);
  r.weights.assign(intervals + 1, h);
  for (std::size_t j = 0; j <= intervals; ++j) {
    // Exact in binary floating point: j / intervals is dyadic.
    r.nodes[j] = -1.0 + 2.0 * (static_cast<double>(j) / static_cast<double>(intervals));
  }
  r.weights.front() = h / 2;
  r.weights.back() = h / 2;
  return r;
}

// Clenshaw-Curtis on the N = n+1 Chebyshev extrema, n = 2^{level-1}.
Rule1D clenshaw_curtis_rule(int level) {
  Rule1D r;
  if (level == 1) {
    r.nodes = {0.0};
    r.weights = {2.0};
    return r;
  }
  const std::size_t n = std::size_t{1} << (level - 1);
  const double pi = std::numbers::pi;
  r.nodes.resize(n + 1);
  r.weights.resize(n + 1);
  std::vector<double> cos_table(n);
  for (std::size_t m = 0; m < n; ++m) cos_table[m] = std::cos(2.0 * pi * (static_cast<double>(m) / static_cast<double>(n)));
  for (std::size_t j = 0; j <= n; ++j) {
    const double theta = pi * (static_cast<double>(j) / static_cast<double>(n));
    // Ascending order, exact mirror symmetry and an exact zero at the centre.
    if (2 * j == n) {
      r.nodes[j] = 0.0;
    } else if (2 * j < n) {
      r.nodes[j] = -std::cos(theta);
    } else {
      r.nodes[j] = -r.nodes[n - j];
    }
    // cos(2 k theta) = cos(2 pi (k j mod n) / n)
    double s = 0.0;
    for (std::size_t k = 1; k <= n / 2; ++k) {
      const double b = (2 * k == n) ? 1.0 : 2.0;
      s += b / static_cast<double>(4 * k * k - 1) * cos_table[(k * j) % n];
    }
    const double c = (j == 0 || j == n) ? 1.0 : 2.0;
    r.weights[j] = c / static_cast<double>(n) * (1.0 - s);
  }
  for (std::size_t j = 0; j < n / 2; ++j) {
    const double w = 0.5 * (r.weights[j] + r.weights[n - j]);
    r.weights[j] = w;
    r.weights[n - j] = w;
  }
  return r;
}

struct RuleCache {
  std::mutex mutex;
  std::array<std::vector<std::shared_ptr<const SurplusRule1D>>, 3> rules;
  std::array<std::uint32_t, 3> next_id{};
};

RuleCache& rule_cache() {
  static RuleCache cache;
  return cache;
}

std::size_t family_slot(RuleFamily family) { return static_cast<std::size_t>(family); }

// Builds the surplus rule of `level` given the one of `level - 1`.
SurplusRule1D build_surplus(RuleFamily family, int level, const SurplusRule1D* coarse,
                            std::uint32_t& next_id) {
  Rule1D fine = make_rule(family, level);
  SurplusRule1D out;
  out.family = family;
  out.level = level;
  out.nodes = fine.nodes;
  out.weights = fine.weights;
  out.node_ids.assign(fine.nodes.size(), 0);

  std::vector<bool> matched(fine.nodes.size(), false);
  if (coarse != nullptr) {
    const Rule1D coarse_rule = make_rule(family, level - 1);
    // Both node lists are ascending: merge.
    std::size_t j = 0;
    for (std::size_t c = 0; c < coarse_rule.nodes.size(); ++c) {
      while (j < fine.nodes.size() && fine.nodes[j] < coarse_rule.nodes[c] - kNodeMatchTol) ++j;
      if (j == fine.nodes.size() || std::abs(fine.nodes[j] - coarse_rule.nodes[c]) > kNodeMatchTol) {
        throw Error(ErrorCode::InvalidArgument,
                    std::string(to_string(family)) + " rules are not nested at level " +
                        std::to_string(level));
      }
      out.weights[j] -= coarse_rule.weights[c];
      out.node_ids[j] = coarse->node_ids[c];
      matched[j] = true;
    }
  }
  for (std::size_t j = 0; j < fine.nodes.size(); ++j) {
    if (!matched[j]) out.node_ids[j] = next_id++;
  }
  return out;
}

}  // namespace

std::string_view to_string(RuleFamily family) {
  switch (family) {
    case RuleFamily::Trapezoidal: return "trapezoidal";
    case RuleFamily::ClenshawCurtis: return "clenshaw-curtis";
    case RuleFamily::GaussPatterson: return "gauss-patterson";
  }
  return "unknown";
}

RuleFamily parse_family(std::string_view name) {
  if (name == "tra" || name == "trapezoidal") return RuleFamily::Trapezoidal;
  if (name == "cc" || name == "clenshaw-curtis") return RuleFamily::ClenshawCurtis;
  if (name == "gp" || name == "gauss-patterson") return RuleFamily::GaussPatterson;
  throw Error(ErrorCode::InvalidArgument, "unknown rule family '" + std::string(name) + "'");
}

int max_level(RuleFamily family) {
  return family == RuleFamily::GaussPatterson ? kMaxPattersonLevel : kMaxDyadicLevel;
}

std::size_t num_points(RuleFamily family, int level) {
  check_level(family, level);
  if (family == RuleFamily::GaussPatterson) return (std::size_t{1} << level) - 1;
  if (level == 1) return 1;
  return (std::size_t{1} << (level - 1)) + 1;
}

double Rule1D::apply(const std::function<double(double)>& f) const {
  double s = 0.0;
  for (std::size_t j = 0; j < nodes.size(); ++j) s += weights[j] * f(nodes[j]);
  return s;
}

double SurplusRule1D::apply(const std::function<double(double)>& f) const {
  double s = 0.0;
  for (std::size_t j = 0; j < nodes.size(); ++j) s += weights[j] * f(nodes[j]);
  return s;
}

Rule1D make_rule(RuleFamily family, int level) {
  check_level(family, level);
  Rule1D r;
  switch (family) {
    case RuleFamily::Trapezoidal: r = trapezoidal_rule(level); break;
    case RuleFamily::ClenshawCurtis: r = clenshaw_curtis_rule(level); break;
    case RuleFamily::GaussPatterson: r = patterson_rule(level); break;
  }
  r.family = family;
  r.level = level;
  return r;
}

std::shared_ptr<const SurplusRule1D> surplus_rule(RuleFamily family, int level) {
  check_level(family, level);
  RuleCache& cache = rule_cache();
  std::lock_guard lock(cache.mutex);
  auto& rules = cache.rules[family_slot(family)];
  // Ids are handed out in level order, so building lazily keeps them stable.
  std::uint32_t& next_id = cache.next_id[family_slot(family)];
  while (static_cast<int>(rules.size()) < level) {
    const int l = static_cast<int>(rules.size()) + 1;
    const SurplusRule1D* coarse = rules.empty() ? nullptr : rules.back().get();
    rules.push_back(std::make_shared<const SurplusRule1D>(build_surplus(family, l, coarse, next_id)));
  }
  return rules[static_cast<std::size_t>(level - 1)];
}

SurplusRule1D make_surplus(RuleFamily family, int level) { return *surplus_rule(family, level); }

int polynomial_exactness_degree(RuleFamily family, int level) {
  const auto n = static_cast<int>(num_points(family, level));
  switch (family) {
    case RuleFamily::Trapezoidal: return 1;
    case RuleFamily::ClenshawCurtis: return n - 1;
    case RuleFamily::GaussPatterson: return (3 * n - 1) / 2;
  }
  return 0;
}

}  // namespace adasgo
