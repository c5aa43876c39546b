#include "adasgo/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <queue>
#include <string>

#include "adasgo/errors.hpp"

namespace adasgo {

std::size_t default_max_evaluations() {
  if (const char* env = std::getenv("ADASGO_MAX_EVALS")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return kDefaultMaxEvaluations;
}

namespace {

struct Candidate {
  MultiIndex index;
  double surplus;
};

// Top of the heap: largest |surplus|, then lexicographically smallest index.
struct Lower {
  bool operator()(const Candidate& a, const Candidate& b) const {
    const double ma = std::abs(a.surplus), mb = std::abs(b.surplus);
    if (ma != mb) return ma < mb;
    return b.index < a.index;
  }
};

}  // namespace

QuadResult adaptive_quadrature(const AdaptiveConfig& cfg, const Integrand& f) {
  if (!(cfg.epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be positive");
  const std::size_t d = cfg.cap.dim();
  if (d == 0) throw Error(ErrorCode::InvalidArgument, "cap must have at least one dimension");
  for (std::size_t k = 0; k < d; ++k) {
    if (cfg.cap[k] > max_level(cfg.family)) {
      throw Error(ErrorCode::UnsupportedLevel, "cap exceeds the levels supported by " +
                                                   std::string(to_string(cfg.family)));
    }
  }

  EvaluationCache cache(f, d, cfg.max_evaluations);
  QuadResult out;
  Downset set(cfg.cap);
  std::vector<double> accepted;
  std::priority_queue<Candidate, std::vector<Candidate>, Lower> heap;

  auto accept = [&](const MultiIndex& i, double s) {
    set.insert(i);
    out.surplus_log.emplace(i, s);
    accepted.push_back(s);
    out.trace.push_back({i, s, pairwise_sum(accepted), cache.evaluations()});
  };
  auto probe = [&](const MultiIndex& i) {
    const double s = tensor_surplus(cfg.family, i, cache);
    if (std::abs(s) >= cfg.epsilon) {
      heap.push({i, s});
    } else {
      out.rejected.emplace(i, s);
    }
  };

  try {
    const MultiIndex root = MultiIndex::ones(d);
    accept(root, tensor_surplus(cfg.family, root, cache));
    for (const auto& c : set.forward_covering(root)) probe(c);
    while (!heap.empty()) {
      const Candidate top = heap.top();
      heap.pop();
      accept(top.index, top.surplus);
      for (const auto& c : set.forward_covering(top.index)) {
        // Rejected covering elements stay rejected: their surplus is fixed.
        if (!out.rejected.contains(c)) probe(c);
      }
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::BudgetExceeded || accepted.empty()) throw;
    out.truncated = true;
  }

  out.value = pairwise_sum(accepted);
  out.point_count = cache.evaluations();
  out.downset = std::move(set);
  return out;
}

nlohmann::json trace_to_json(const QuadResult& result) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : result.trace) {
    steps.push_back({{"index", s.index.levels()},
                     {"surplus", s.surplus},
                     {"value", s.cumulative_value},
                     {"points", s.cumulative_points}});
  }
  return steps;
}

std::pair<double, double> priori_bound(double card_L, double card_I, double epsilon) {
  if (card_I > card_L) throw Error(ErrorCode::InvalidArgument, "|I| exceeds |L|");
  return {card_L * epsilon, (card_L - card_I) * epsilon};
}

namespace {

double smoothness_constant(std::size_t d, const ErrorBoundParams& p) {
  if (!p.f_norm) throw Error(ErrorCode::InvalidArgument, "smoothness bound needs ||f||");
  const double dd = static_cast<double>(d);
  return std::pow(p.gamma_r, dd) * std::pow(1.0 + std::exp2(p.r), dd) * *p.f_norm;
}

// sum over the box {1 <= i <= cap} of 2^{-r|i|}, factorised per dimension.
double box_weight_sum(const MultiIndex& cap, int r) {
  double prod = 1.0;
  for (std::size_t k = 0; k < cap.dim(); ++k) {
    double s = 0.0;
    for (int l = 1; l <= cap[k]; ++l) s += std::exp2(-r * l);
    prod *= s;
  }
  return prod;
}

double downset_weight_sum(const Downset& s, int r) {
  double sum = 0.0;
  for (const auto& i : s.journal()) sum += std::exp2(-r * i.l1());
  return sum;
}

void check_subset(const Downset& L, const Downset& I) {
  for (const auto& i : I.journal()) {
    if (!L.contains(i)) throw Error(ErrorCode::InvalidArgument, "I is not a subset of L");
  }
}

RhoBound finish_rho(double eps, int r, std::optional<double> rho, int m1, double weight_sum,
                    double count) {
  if (count <= 0.0) return {};
  const double sum = std::exp2(r * m1) * weight_sum;
  RhoBound out;
  out.rho_min = sum / count;
  const double used = rho.value_or(out.rho_min);
  if (!(used > 0.0)) throw Error(ErrorCode::InvalidArgument, "rho must be positive");
  out.bound = eps / used * sum;
  return out;
}

}  // namespace

double smoothness_bound(const Downset& L, const Downset& I, const ErrorBoundParams& params) {
  check_subset(L, I);
  double sum = 0.0;
  for (const auto& i : L.journal()) {
    if (!I.contains(i)) sum += std::exp2(-params.r * i.l1());
  }
  if (sum == 0.0) return 0.0;
  return smoothness_constant(L.dimension(), params) * sum;
}

double smoothness_bound(const MultiIndex& cap, const Downset& I, const ErrorBoundParams& params) {
  const double diff = box_weight_sum(cap, params.r) - downset_weight_sum(I, params.r);
  if (static_cast<double>(I.size()) >= box_cardinality(cap)) return 0.0;
  return smoothness_constant(cap.dim(), params) * std::max(diff, 0.0);
}

RhoBound rho_bound(const Downset& L, const Downset& I, double epsilon, int r,
                   std::optional<double> rho) {
  check_subset(L, I);
  int m1 = std::numeric_limits<int>::max();
  for (const auto& i : L.journal()) {
    if (!I.contains(i)) m1 = std::min(m1, i.l1());
  }
  double sum = 0.0;
  for (const auto& i : L.journal()) {
    if (!I.contains(i)) sum += std::exp2(-r * i.l1());
  }
  return finish_rho(epsilon, r, rho, m1, sum, static_cast<double>(L.size() - I.size()));
}

RhoBound rho_bound(const MultiIndex& cap, const Downset& I, double epsilon, int r,
                   std::optional<double> rho) {
  const double count = box_cardinality(cap) - static_cast<double>(I.size());
  if (count <= 0.0) return {};
  // The minimal-|.|_1 element of L\I has all predecessors in I, so it is
  // a covering element.
  int m1 = std::numeric_limits<int>::max();
  for (const auto& c : I.covering_elements()) m1 = std::min(m1, c.l1());
  const double sum = std::max(box_weight_sum(cap, r) - downset_weight_sum(I, r), 0.0);
  return finish_rho(epsilon, r, rho, m1, sum, count);
}

double estimate_f_norm(RuleFamily family, std::size_t dim, const Integrand& f) {
  const auto grid = sparse_grid(family, 2, dim);
  double norm = 0.0;
  for (const auto& x : grid.points) norm = std::max(norm, std::abs(f(x)));
  return norm;
}

BoundBundle compute_bounds(const QuadResult& result, const AdaptiveConfig& cfg,
                           const ErrorBoundParams& params, const Integrand* f) {
  if (!result.downset) throw Error(ErrorCode::InvalidArgument, "result carries no downset");
  const Downset& I = *result.downset;
  BoundBundle b;
  b.card_L = box_cardinality(cfg.cap);
  b.card_L_zero_origin = 1.0;
  for (std::size_t k = 0; k < cfg.cap.dim(); ++k) b.card_L_zero_origin *= cfg.cap[k] + 1.0;
  b.card_I = static_cast<double>(I.size());
  std::tie(b.priori, b.posteriori) = priori_bound(b.card_L, b.card_I, cfg.epsilon);

  ErrorBoundParams p = params;
  if (!p.f_norm) {
    if (f == nullptr) throw Error(ErrorCode::InvalidArgument, "need ||f|| or the integrand");
    p.f_norm = estimate_f_norm(cfg.family, cfg.cap.dim(), *f);
  }
  b.smoothness = smoothness_bound(cfg.cap, I, p);
  const RhoBound rb = rho_bound(cfg.cap, I, cfg.epsilon, p.r, p.rho);
  b.rho_form = rb.bound;
  b.rho_min = rb.rho_min;
  b.rho_used = p.rho.value_or(rb.rho_min);
  return b;
}

}  // namespace adasgo
