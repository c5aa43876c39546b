#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "adasgo/errors.hpp"
#include "adasgo/sg_quadrature.hpp"

using namespace adasgo;

namespace {

constexpr RuleFamily kFamilies[] = {RuleFamily::Trapezoidal, RuleFamily::ClenshawCurtis,
                                    RuleFamily::GaussPatterson};

// Plain nested-loop tensor product of make_rule, no surpluses or caching.
double brute_product(RuleFamily family, const std::vector<int>& cap, const Integrand& f) {
  std::vector<Rule1D> rules;
  for (int l : cap) rules.push_back(make_rule(family, l));
  const std::size_t d = cap.size();
  std::vector<std::size_t> pos(d, 0);
  std::vector<double> x(d);
  double sum = 0.0;
  while (true) {
    double w = 1.0;
    for (std::size_t k = 0; k < d; ++k) {
      x[k] = rules[k].nodes[pos[k]];
      w *= rules[k].weights[pos[k]];
    }
    sum += w * f(x);
    std::size_t k = d;
    while (k > 0) {
      --k;
      if (++pos[k] < rules[k].nodes.size()) break;
      pos[k] = 0;
      if (k == 0) return sum;
    }
  }
}

// Distinct coordinates of the union of tensor grids over the classical
// index set, identified by rounded coordinates.
std::size_t enumerate_sparse_points(RuleFamily family, int level) {
  std::set<std::pair<long long, long long>> pts;
  auto key = [](double v) { return std::llround(v * 1e12); };
  for (int a = 1; a <= level; ++a) {
    for (int b = 1; a + b <= level + 1; ++b) {
      const auto ra = make_rule(family, a), rb = make_rule(family, b);
      for (double x : ra.nodes)
        for (double y : rb.nodes) pts.emplace(key(x), key(y));
    }
  }
  return pts.size();
}

struct SmoothFn {
  std::vector<double> a, b;
  double operator()(std::span<const double> x) const {
    double s = 0.0, p = 1.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      s += a[k] * x[k];
      p *= 1.0 / (1.0 + b[k] * x[k] * x[k]);
    }
    return std::exp(0.5 * s) * p;
  }
};

}  // namespace

TEST(TensorSurplus, Examples) {
  const Integrand one = [](std::span<const double>) { return 1.0; };
  for (auto f : kFamilies) {
    EXPECT_DOUBLE_EQ(tensor_surplus(f, MultiIndex{1, 1}, one), 4.0);
    EXPECT_NEAR(tensor_surplus(f, MultiIndex{2, 1}, one), 0.0, 1e-14);
  }
  const Integrand x2y2 = [](std::span<const double> x) { return x[0] * x[0] * x[1] * x[1]; };
  EXPECT_DOUBLE_EQ(tensor_surplus(RuleFamily::Trapezoidal, MultiIndex{2, 2}, x2y2), 1.0);
}

TEST(TensorSurplus, EvaluationCount) {
  std::size_t calls = 0;
  const Integrand f = [&calls](std::span<const double>) {
    ++calls;
    return 1.0;
  };
  tensor_surplus(RuleFamily::GaussPatterson, MultiIndex{3, 2}, f);
  EXPECT_EQ(calls, 7u * 3u);
}

TEST(TensorSurplus, NonFinitePropagates) {
  const Integrand bad = [](std::span<const double>) { return std::nan(""); };
  try {
    tensor_surplus(RuleFamily::ClenshawCurtis, MultiIndex{1, 1}, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteValue);
  }
}

TEST(ProductRule, Examples) {
  const Integrand one = [](std::span<const double>) { return 1.0; };
  EXPECT_NEAR(product_rule(RuleFamily::ClenshawCurtis, MultiIndex{3, 2, 4}, one).value, 8.0, 1e-13);
  const Integrand lin = [](std::span<const double> x) { return x[0] + x[1]; };
  EXPECT_NEAR(product_rule(RuleFamily::GaussPatterson, MultiIndex{2, 2}, lin).value, 0.0, 1e-15);
  const Integrand x2y2 = [](std::span<const double> x) { return x[0] * x[0] * x[1] * x[1]; };
  EXPECT_NEAR(product_rule(RuleFamily::ClenshawCurtis, MultiIndex{3, 3}, x2y2).value, 4.0 / 9.0, 1e-12);
}

TEST(ProductRule, Budget) {
  const Integrand one = [](std::span<const double>) { return 1.0; };
  try {
    product_rule(RuleFamily::GaussPatterson, MultiIndex{8, 8, 8}, one, 1000);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BudgetExceeded);
  }
}

TEST(SparseGrid, Examples) {
  const Integrand one = [](std::span<const double>) { return 1.0; };
  EXPECT_NEAR(classical_sparse_grid(RuleFamily::ClenshawCurtis, 2, 3, one).value, 8.0, 1e-13);
  const Integrand x2y2 = [](std::span<const double> x) { return x[0] * x[0] * x[1] * x[1]; };
  EXPECT_NEAR(classical_sparse_grid(RuleFamily::GaussPatterson, 3, 2, x2y2).value, 4.0 / 9.0, 1e-10);
}

TEST(SparseGrid, OneDimensionalCollapse) {
  const Integrand g = [](std::span<const double> x) { return std::exp(x[0]) / (1.2 + x[0]); };
  for (auto f : kFamilies) {
    for (int l = 1; l <= 6; ++l) {
      const double sg = classical_sparse_grid(f, l, 1, g).value;
      const double q = make_rule(f, l).apply([](double x) { return std::exp(x) / (1.2 + x); });
      EXPECT_NEAR(sg, q, 1e-13 * std::abs(q));
    }
  }
}

TEST(SparseGrid, PointCountsMatchEnumeration) {
  const Integrand one = [](std::span<const double>) { return 1.0; };
  for (auto f : kFamilies) {
    for (int l = 1; l <= 5; ++l) {
      const auto r = classical_sparse_grid(f, l, 2, one);
      EXPECT_EQ(r.point_count, enumerate_sparse_points(f, l)) << to_string(f) << " l=" << l;
      EXPECT_EQ(sparse_grid(f, l, 2).points.size(), r.point_count);
    }
  }
}

TEST(SparseGrid, FrozenPointCounts) {
  const Integrand one = [](std::span<const double>) { return 1.0; };
  const std::vector<std::size_t> cc{1, 5, 13, 29, 65};
  const std::vector<std::size_t> gp{1, 5, 17, 49, 129};
  for (int l = 1; l <= 5; ++l) {
    EXPECT_EQ(classical_sparse_grid(RuleFamily::ClenshawCurtis, l, 2, one).point_count, cc[l - 1]);
    EXPECT_EQ(classical_sparse_grid(RuleFamily::Trapezoidal, l, 2, one).point_count, cc[l - 1]);
    EXPECT_EQ(classical_sparse_grid(RuleFamily::GaussPatterson, l, 2, one).point_count, gp[l - 1]);
  }
}

TEST(SparseGrid, CombinedWeightsIntegrateConstants) {
  for (auto f : kFamilies) {
    for (std::size_t d = 1; d <= 4; ++d) {
      for (int l = 1; l <= 4; ++l) {
        const auto g = sparse_grid(f, l, d);
        double sum = 0.0;
        for (double w : g.weights) sum += w;
        EXPECT_NEAR(sum, std::pow(2.0, static_cast<double>(d)), 1e-10);
      }
    }
  }
  // Combination form produces negative weights.
  const auto g = sparse_grid(RuleFamily::ClenshawCurtis, 3, 2);
  EXPECT_TRUE(std::any_of(g.weights.begin(), g.weights.end(), [](double w) { return w < 0.0; }));
}

TEST(SparseGrid, GridWeightsReproduceQuadrature) {
  const Integrand g = [](std::span<const double> x) { return std::cos(x[0] + 0.3 * x[1]) * std::exp(x[2]); };
  for (auto f : kFamilies) {
    const auto grid = sparse_grid(f, 4, 3);
    double sum = 0.0;
    for (std::size_t j = 0; j < grid.points.size(); ++j) sum += grid.weights[j] * g(grid.points[j]);
    EXPECT_NEAR(sum, classical_sparse_grid(f, 4, 3, g).value, 1e-13);
  }
}

TEST(SparseGrid, CsvExport) {
  const auto g = product_grid(RuleFamily::Trapezoidal, MultiIndex{2});
  std::ostringstream os;
  g.write_csv(os);
  EXPECT_EQ(os.str(), "x_1,weight\n-1,0.5\n0,1\n1,0.5\n");
}

TEST(DownsetQuadrature, Examples) {
  const Integrand c = [](std::span<const double>) { return 2.5; };
  Downset s(MultiIndex{3, 3});
  s.insert(MultiIndex{1, 1});
  const auto r = downset_quadrature(RuleFamily::ClenshawCurtis, s, c);
  EXPECT_DOUBLE_EQ(r.value, 10.0);
  EXPECT_EQ(r.point_count, 1u);
  ASSERT_TRUE(r.downset.has_value());
  EXPECT_EQ(r.surplus_log.size(), 1u);

  const Integrand g = [](std::span<const double> x) { return std::exp(x[0] - x[1] * x[1]); };
  for (auto f : kFamilies) {
    const double a = downset_quadrature(f, Downset::classical(4, 2), g).value;
    const double b = classical_sparse_grid(f, 4, 2, g).value;
    EXPECT_EQ(a, b);
  }
}

TEST(DownsetQuadrature, EachNodeEvaluatedOnce) {
  std::size_t calls = 0;
  const Integrand f = [&calls](std::span<const double> x) {
    ++calls;
    return x[0] * x[1];
  };
  const auto r = downset_quadrature(RuleFamily::ClenshawCurtis, Downset::full_box(MultiIndex{3, 3}), f);
  EXPECT_EQ(calls, 25u);
  EXPECT_EQ(r.point_count, 25u);
}

TEST(DownsetQuadrature, ValueEqualsSurplusSum) {
  const Integrand g = [](std::span<const double> x) { return 1.0 / (1.5 + x[0] * x[1] + x[2]); };
  const auto r = downset_quadrature(RuleFamily::GaussPatterson, Downset::classical(4, 3), g);
  double sum = 0.0;
  for (const auto& [i, v] : r.surplus_log) sum += v;
  EXPECT_NEAR(r.value, sum, 1e-12 * std::abs(r.value));
}

TEST(DownsetQuadrature, FullBoxMatchesBruteProduct) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> ua(-1.0, 1.0), ub(0.0, 2.0);
  std::uniform_int_distribution<int> uc(1, 4);
  for (int trial = 0; trial < 25; ++trial) {
    for (std::size_t d = 1; d <= 3; ++d) {
      SmoothFn fn{std::vector<double>(d), std::vector<double>(d)};
      for (std::size_t k = 0; k < d; ++k) {
        fn.a[k] = ua(rng);
        fn.b[k] = ub(rng);
      }
      std::vector<int> cap(d);
      for (auto& c : cap) c = uc(rng);
      const Integrand f = fn;
      for (auto fam : kFamilies) {
        const double ref = brute_product(fam, cap, f);
        const double got = downset_quadrature(fam, Downset::full_box(MultiIndex(cap)), f).value;
        const double prod = product_rule(fam, MultiIndex(cap), f).value;
        EXPECT_LE(std::abs(got - ref), 1e-12 * std::abs(ref));
        EXPECT_LE(std::abs(prod - ref), 1e-12 * std::abs(ref));
      }
    }
  }
}

TEST(DownsetQuadrature, BudgetExceeded) {
  const Integrand one = [](std::span<const double>) { return 1.0; };
  try {
    downset_quadrature(RuleFamily::GaussPatterson, Downset::full_box(MultiIndex{5, 5}), one, 100);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BudgetExceeded);
  }
}

TEST(PairwiseSum, MatchesExactSum) {
  std::vector<double> v(1000);
  for (std::size_t j = 0; j < v.size(); ++j) v[j] = static_cast<double>(j);
  EXPECT_EQ(pairwise_sum(v), 499500.0);
  EXPECT_EQ(pairwise_sum({}), 0.0);
}
