#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "adasgo/errors.hpp"
#include "adasgo/rules1d.hpp"

using namespace adasgo;

namespace {

constexpr RuleFamily kFamilies[] = {RuleFamily::Trapezoidal, RuleFamily::ClenshawCurtis,
                                    RuleFamily::GaussPatterson};

double monomial_integral(int k) { return k % 2 == 1 ? 0.0 : 2.0 / (k + 1); }

// Interpolatory weights for given nodes by solving the moment system in
// extended precision. Independent from the library's weight formulas.
std::vector<double> moment_weights(const std::vector<double>& x) {
  const int n = static_cast<int>(x.size());
  using Mat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  Mat v(n, n);
  Vec m(n);
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) v(k, j) = std::pow(static_cast<long double>(x[j]), k);
    m(k) = monomial_integral(k);
  }
  Vec w = v.fullPivLu().solve(m);
  return {w.data(), w.data() + n};
}

int test_levels(RuleFamily f) { return f == RuleFamily::GaussPatterson ? 8 : 10; }

}  // namespace

TEST(Rules1D, TrapezoidLevelTwo) {
  const auto r = make_rule(RuleFamily::Trapezoidal, 2);
  EXPECT_EQ(r.nodes, (std::vector<double>{-1.0, 0.0, 1.0}));
  EXPECT_EQ(r.weights, (std::vector<double>{0.5, 1.0, 0.5}));
}

TEST(Rules1D, LevelOneIsSinglePoint) {
  for (auto f : kFamilies) {
    const auto r = make_rule(f, 1);
    ASSERT_EQ(r.nodes.size(), 1u);
    EXPECT_EQ(r.nodes[0], 0.0);
    EXPECT_DOUBLE_EQ(r.weights[0], 2.0);
  }
}

TEST(Rules1D, PattersonLevelTwoIsGaussLegendre) {
  const auto r = make_rule(RuleFamily::GaussPatterson, 2);
  const double x = std::sqrt(3.0 / 5.0);
  ASSERT_EQ(r.nodes.size(), 3u);
  EXPECT_NEAR(r.nodes[0], -x, 1e-15);
  EXPECT_NEAR(r.nodes[1], 0.0, 1e-15);
  EXPECT_NEAR(r.nodes[2], x, 1e-15);
  EXPECT_NEAR(r.weights[0], 5.0 / 9.0, 1e-15);
  EXPECT_NEAR(r.weights[1], 8.0 / 9.0, 1e-15);
  EXPECT_NEAR(r.weights[2], 5.0 / 9.0, 1e-15);
}

TEST(Rules1D, ClenshawCurtisLevelThree) {
  const auto r = make_rule(RuleFamily::ClenshawCurtis, 3);
  const double s = std::numbers::sqrt2 / 2.0;
  const std::vector<double> nodes{-1.0, -s, 0.0, s, 1.0};
  const std::vector<double> weights{1.0 / 15, 8.0 / 15, 12.0 / 15, 8.0 / 15, 1.0 / 15};
  ASSERT_EQ(r.nodes.size(), 5u);
  for (int j = 0; j < 5; ++j) {
    EXPECT_NEAR(r.nodes[j], nodes[j], 1e-15);
    EXPECT_NEAR(r.weights[j], weights[j], 1e-15);
  }
}

TEST(Rules1D, PointCounts) {
  for (int l = 2; l <= 10; ++l) {
    EXPECT_EQ(num_points(RuleFamily::Trapezoidal, l), (1u << (l - 1)) + 1);
    EXPECT_EQ(num_points(RuleFamily::ClenshawCurtis, l), (1u << (l - 1)) + 1);
  }
  for (int l = 1; l <= 8; ++l) {
    EXPECT_EQ(num_points(RuleFamily::GaussPatterson, l), (1u << l) - 1);
    EXPECT_EQ(make_rule(RuleFamily::GaussPatterson, l).nodes.size(), (1u << l) - 1);
  }
}

TEST(Rules1D, UnsupportedLevels) {
  EXPECT_THROW(make_rule(RuleFamily::GaussPatterson, 9), Error);
  EXPECT_THROW(make_rule(RuleFamily::ClenshawCurtis, 0), Error);
  EXPECT_THROW(make_rule(RuleFamily::Trapezoidal, max_level(RuleFamily::Trapezoidal) + 1), Error);
  EXPECT_EQ(max_level(RuleFamily::ClenshawCurtis), 14);
  try {
    make_surplus(RuleFamily::GaussPatterson, 9);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnsupportedLevel);
  }
}

TEST(Rules1D, ExactnessDegrees) {
  EXPECT_EQ(polynomial_exactness_degree(RuleFamily::GaussPatterson, 2), 4);
  EXPECT_EQ(polynomial_exactness_degree(RuleFamily::GaussPatterson, 4), 22);
  EXPECT_EQ(polynomial_exactness_degree(RuleFamily::Trapezoidal, 5), 1);
  EXPECT_EQ(polynomial_exactness_degree(RuleFamily::ClenshawCurtis, 3), 4);
}

TEST(Rules1D, BasicInvariants) {
  for (auto f : kFamilies) {
    for (int l = 1; l <= test_levels(f); ++l) {
      const auto r = make_rule(f, l);
      ASSERT_EQ(r.nodes.size(), r.weights.size());
      double sum = 0.0;
      for (double w : r.weights) sum += w;
      EXPECT_NEAR(sum, 2.0, 1e-13) << to_string(f) << " level " << l;
      const std::size_t n = r.nodes.size();
      for (std::size_t j = 0; j < n; ++j) {
        EXPECT_GE(r.nodes[j], -1.0);
        EXPECT_LE(r.nodes[j], 1.0);
        if (j > 0) EXPECT_LT(r.nodes[j - 1], r.nodes[j]);
        EXPECT_NEAR(r.nodes[j], -r.nodes[n - 1 - j], 1e-13);
        EXPECT_NEAR(r.weights[j], r.weights[n - 1 - j], 1e-13);
      }
    }
  }
}

TEST(Rules1D, MonomialExactness) {
  for (auto f : kFamilies) {
    for (int l = 1; l <= test_levels(f); ++l) {
      const auto r = make_rule(f, l);
      const int deg = std::min(polynomial_exactness_degree(f, l), 60);
      for (int k = 0; k <= deg; ++k) {
        const double q = r.apply([k](double x) { return std::pow(x, k); });
        EXPECT_NEAR(q, monomial_integral(k), 1e-12) << to_string(f) << " l=" << l << " k=" << k;
      }
    }
  }
}

TEST(Rules1D, WeightsMatchMomentOracle) {
  // Small levels only: the Vandermonde system is ill-conditioned beyond that.
  for (auto f : {RuleFamily::ClenshawCurtis, RuleFamily::GaussPatterson}) {
    for (int l = 1; l <= 4; ++l) {
      const auto r = make_rule(f, l);
      const auto w = moment_weights(r.nodes);
      for (std::size_t j = 0; j < w.size(); ++j) EXPECT_NEAR(r.weights[j], w[j], 1e-12);
    }
  }
}

TEST(Rules1D, OddMonomialsVanish) {
  for (auto f : kFamilies) {
    for (int l = 1; l <= test_levels(f); ++l) {
      const auto r = make_rule(f, l);
      for (int k = 1; k <= 15; k += 2) {
        EXPECT_LE(std::abs(r.apply([k](double x) { return std::pow(x, k); })), 1e-14);
      }
    }
  }
}

TEST(Rules1D, Nested) {
  for (auto f : kFamilies) {
    for (int l = 1; l < test_levels(f); ++l) {
      const auto coarse = make_rule(f, l);
      const auto fine = make_rule(f, l + 1);
      for (double x : coarse.nodes) {
        bool found = false;
        for (double y : fine.nodes) found = found || std::abs(x - y) <= 1e-13;
        EXPECT_TRUE(found) << to_string(f) << " level " << l << " node " << x;
      }
    }
  }
}

TEST(Surplus1D, Examples) {
  const auto s1 = make_surplus(RuleFamily::Trapezoidal, 1);
  EXPECT_EQ(s1.nodes, std::vector<double>{0.0});
  EXPECT_EQ(s1.weights, std::vector<double>{2.0});
  const auto s2 = make_surplus(RuleFamily::Trapezoidal, 2);
  EXPECT_DOUBLE_EQ(s2.apply([](double x) { return x * x; }), 1.0);
  const auto g2 = make_surplus(RuleFamily::GaussPatterson, 2);
  EXPECT_NEAR(g2.apply([](double) { return 1.0; }), 0.0, 1e-15);
}

TEST(Surplus1D, WeightSums) {
  for (auto f : kFamilies) {
    for (int l = 1; l <= test_levels(f); ++l) {
      const auto s = make_surplus(f, l);
      double sum = 0.0;
      for (double w : s.weights) sum += w;
      EXPECT_NEAR(sum, l == 1 ? 2.0 : 0.0, 1e-13);
    }
  }
}

TEST(Surplus1D, WeightsAreDifferences) {
  for (auto f : kFamilies) {
    for (int l = 2; l <= 6; ++l) {
      const auto s = make_surplus(f, l);
      const auto fine = make_rule(f, l);
      const auto coarse = make_rule(f, l - 1);
      ASSERT_EQ(s.nodes.size(), fine.nodes.size());
      for (std::size_t j = 0; j < s.nodes.size(); ++j) {
        double expected = fine.weights[j];
        for (std::size_t m = 0; m < coarse.nodes.size(); ++m) {
          if (std::abs(coarse.nodes[m] - s.nodes[j]) <= 1e-13) expected -= coarse.weights[m];
        }
        EXPECT_NEAR(s.weights[j], expected, 1e-14);
      }
    }
  }
}

TEST(Surplus1D, NodeIdsStableAcrossLevels) {
  for (auto f : kFamilies) {
    const auto fine = surplus_rule(f, 6);
    for (int l = 1; l < 6; ++l) {
      const auto coarse = surplus_rule(f, l);
      for (std::size_t j = 0; j < coarse->nodes.size(); ++j) {
        for (std::size_t m = 0; m < fine->nodes.size(); ++m) {
          if (fine->nodes[m] == coarse->nodes[j]) EXPECT_EQ(fine->node_ids[m], coarse->node_ids[j]);
        }
      }
    }
  }
}

TEST(Surplus1D, TelescopingRandomPolynomials) {
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  std::uniform_int_distribution<int> degree(0, 12);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> c(degree(rng) + 1);
    for (double& v : c) v = coef(rng);
    auto p = [&c](double x) {
      double s = 0.0;
      for (auto it = c.rbegin(); it != c.rend(); ++it) s = s * x + *it;
      return s;
    };
    for (auto f : kFamilies) {
      const int top = f == RuleFamily::GaussPatterson ? 6 : 7;
      double sum = 0.0;
      for (int l = 1; l <= top; ++l) sum += make_surplus(f, l).apply(p);
      const double direct = make_rule(f, top).apply(p);
      EXPECT_LE(std::abs(sum - direct), 1e-12 * std::max(1.0, std::abs(direct)));
    }
  }
}

TEST(Surplus1D, TelescopingSmoothFunctions) {
  std::mt19937_64 rng(777);
  std::uniform_real_distribution<double> a(0.2, 3.0), b(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double alpha = a(rng), beta = b(rng);
    auto g = [alpha, beta](double x) { return std::exp(alpha * x) * std::cos(beta + x) + 1.0 / (2.0 + x * beta); };
    for (auto f : kFamilies) {
      double sum = 0.0;
      for (int l = 1; l <= 6; ++l) sum += make_surplus(f, l).apply(g);
      const double direct = make_rule(f, 6).apply(g);
      EXPECT_LE(std::abs(sum - direct), 1e-12 * std::max(1.0, std::abs(direct)));
    }
  }
}

TEST(Rules1D, ParseFamily) {
  EXPECT_EQ(parse_family("gp"), RuleFamily::GaussPatterson);
  EXPECT_EQ(parse_family("cc"), RuleFamily::ClenshawCurtis);
  EXPECT_EQ(parse_family("tra"), RuleFamily::Trapezoidal);
  EXPECT_THROW(parse_family("simpson"), Error);
}
