#include "adasgo/sg_quadrature.hpp"

#include <cmath>
#include <memory>
#include <ostream>
#include <string>

#include "adasgo/errors.hpp"

namespace adasgo {

namespace {

std::vector<std::shared_ptr<const SurplusRule1D>> surplus_rules(RuleFamily family,
                                                                 const MultiIndex& index) {
  std::vector<std::shared_ptr<const SurplusRule1D>> rules;
  rules.reserve(index.dim());
  for (std::size_t k = 0; k < index.dim(); ++k) rules.push_back(surplus_rule(family, index[k]));
  return rules;
}

// Odometer over the tensor grid of the given per-dimension sizes.
bool advance(std::vector<std::size_t>& pos, const std::vector<std::size_t>& sizes) {
  for (std::size_t k = pos.size(); k-- > 0;) {
    if (++pos[k] < sizes[k]) return true;
    pos[k] = 0;
  }
  return false;
}

}  // namespace

std::size_t EvaluationCache::KeyHash::operator()(
    const std::vector<std::uint32_t>& k) const noexcept {
  std::size_t h = 1469598103934665603ull;
  for (std::uint32_t v : k) {
    h ^= v;
    h *= 1099511628211ull;
  }
  return h;
}

EvaluationCache::EvaluationCache(const Integrand& f, std::size_t dim,
                                 std::size_t max_evaluations)
    : f_(f), dim_(dim), max_evaluations_(max_evaluations), key_(dim) {}

double EvaluationCache::evaluate(std::span<const std::uint32_t> ids,
                                 std::span<const double> point) {
  key_.assign(ids.begin(), ids.end());
  if (auto it = values_.find(key_); it != values_.end()) return it->second;
  if (values_.size() >= max_evaluations_) {
    throw Error(ErrorCode::BudgetExceeded,
                "evaluation budget of " + std::to_string(max_evaluations_) + " exhausted");
  }
  const double v = f_(point);
  if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "integrand returned a non-finite value");
  values_.emplace(key_, v);
  return v;
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double tensor_surplus(RuleFamily family, const MultiIndex& index, EvaluationCache& cache) {
  const std::size_t d = index.dim();
  if (d != cache.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "surplus index dimension differs from integrand");
  }
  const auto rules = surplus_rules(family, index);
  std::vector<std::size_t> sizes(d), pos(d, 0);
  for (std::size_t k = 0; k < d; ++k) sizes[k] = rules[k]->nodes.size();

  std::vector<double> point(d);
  std::vector<std::uint32_t> ids(d);
  double sum = 0.0;
  do {
    double w = 1.0;
    for (std::size_t k = 0; k < d; ++k) {
      point[k] = rules[k]->nodes[pos[k]];
      ids[k] = rules[k]->node_ids[pos[k]];
      w *= rules[k]->weights[pos[k]];
    }
    sum += w * cache.evaluate(ids, point);
  } while (advance(pos, sizes));
  return sum;
}

double tensor_surplus(RuleFamily family, const MultiIndex& index, const Integrand& f) {
  EvaluationCache cache(f, index.dim());
  return tensor_surplus(family, index, cache);
}

QuadResult product_rule(RuleFamily family, const MultiIndex& cap, const Integrand& f,
                        std::size_t max_evaluations) {
  const std::size_t d = cap.dim();
  std::vector<Rule1D> rules;
  std::vector<std::size_t> sizes(d), pos(d, 0);
  double projected = 1.0;
  for (std::size_t k = 0; k < d; ++k) {
    rules.push_back(make_rule(family, cap[k]));
    sizes[k] = rules.back().nodes.size();
    projected *= static_cast<double>(sizes[k]);
  }
  if (projected > static_cast<double>(max_evaluations)) {
    throw Error(ErrorCode::BudgetExceeded, "product rule needs " + std::to_string(projected) +
                                               " evaluations, budget " +
                                               std::to_string(max_evaluations));
  }
  std::vector<double> point(d), terms;
  terms.reserve(static_cast<std::size_t>(projected));
  do {
    double w = 1.0;
    for (std::size_t k = 0; k < d; ++k) {
      point[k] = rules[k].nodes[pos[k]];
      w *= rules[k].weights[pos[k]];
    }
    const double v = f(point);
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "integrand returned a non-finite value");
    terms.push_back(w * v);
  } while (advance(pos, sizes));

  QuadResult out;
  out.value = pairwise_sum(terms);
  out.point_count = terms.size();
  return out;
}

QuadResult downset_quadrature(RuleFamily family, const Downset& set, const Integrand& f,
                              std::size_t max_evaluations) {
  if (!set.is_downward_closed()) throw Error(ErrorCode::NotADownset, "index set is not downward closed");
  EvaluationCache cache(f, set.dimension(), max_evaluations);
  QuadResult out;
  std::vector<double> surpluses;
  surpluses.reserve(set.size());
  for (const auto& i : set.journal()) {
    const double s = tensor_surplus(family, i, cache);
    surpluses.push_back(s);
    out.surplus_log.emplace(i, s);
  }
  out.value = pairwise_sum(surpluses);
  out.point_count = cache.evaluations();
  out.downset = set;
  return out;
}

QuadResult classical_sparse_grid(RuleFamily family, int level, std::size_t dim,
                                 const Integrand& f, std::size_t max_evaluations) {
  return downset_quadrature(family, Downset::classical(level, dim), f, max_evaluations);
}

void GridPointSet::write_csv(std::ostream& os) const {
  for (std::size_t k = 0; k < dim; ++k) os << "x_" << (k + 1) << ",";
  os << "weight\n";
  os.precision(17);
  for (std::size_t j = 0; j < points.size(); ++j) {
    for (double x : points[j]) os << x << ",";
    os << weights[j] << "\n";
  }
}

GridPointSet product_grid(RuleFamily family, const MultiIndex& cap) {
  GridPointSet out;
  out.dim = cap.dim();
  out.source = "product";
  std::vector<Rule1D> rules;
  std::vector<std::size_t> sizes(out.dim), pos(out.dim, 0);
  for (std::size_t k = 0; k < out.dim; ++k) {
    rules.push_back(make_rule(family, cap[k]));
    sizes[k] = rules.back().nodes.size();
  }
  do {
    std::vector<double> x(out.dim);
    double w = 1.0;
    for (std::size_t k = 0; k < out.dim; ++k) {
      x[k] = rules[k].nodes[pos[k]];
      w *= rules[k].weights[pos[k]];
    }
    out.points.push_back(std::move(x));
    out.weights.push_back(w);
  } while (advance(pos, sizes));
  return out;
}

GridPointSet downset_grid(RuleFamily family, const Downset& set) {
  GridPointSet out;
  out.dim = set.dimension();
  out.source = "downset";
  // Keyed by node ids so coinciding nodes merge with summed weights.
  std::map<std::vector<std::uint32_t>, std::size_t> slot;
  for (const auto& i : set.journal()) {
    const auto rules = surplus_rules(family, i);
    std::vector<std::size_t> sizes(out.dim), pos(out.dim, 0);
    for (std::size_t k = 0; k < out.dim; ++k) sizes[k] = rules[k]->nodes.size();
    do {
      std::vector<std::uint32_t> ids(out.dim);
      std::vector<double> x(out.dim);
      double w = 1.0;
      for (std::size_t k = 0; k < out.dim; ++k) {
        ids[k] = rules[k]->node_ids[pos[k]];
        x[k] = rules[k]->nodes[pos[k]];
        w *= rules[k]->weights[pos[k]];
      }
      auto [it, inserted] = slot.emplace(std::move(ids), out.points.size());
      if (inserted) {
        out.points.push_back(std::move(x));
        out.weights.push_back(w);
      } else {
        out.weights[it->second] += w;
      }
    } while (advance(pos, sizes));
  }
  return out;
}

GridPointSet sparse_grid(RuleFamily family, int level, std::size_t dim) {
  GridPointSet out = downset_grid(family, Downset::classical(level, dim));
  out.source = "sparse(" + std::to_string(level) + ")";
  return out;
}

}  // namespace adasgo
