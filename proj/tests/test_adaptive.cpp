#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <numeric>

#include <Eigen/Dense>

#include "adasgo/adaptive.hpp"
#include "adasgo/errors.hpp"

using namespace adasgo;

namespace {

constexpr RuleFamily kFamilies[] = {RuleFamily::Trapezoidal, RuleFamily::ClenshawCurtis,
                                    RuleFamily::GaussPatterson};

AdaptiveConfig config(double eps, MultiIndex cap, RuleFamily family) {
  AdaptiveConfig cfg;
  cfg.epsilon = eps;
  cfg.cap = std::move(cap);
  cfg.family = family;
  return cfg;
}

Downset members(std::initializer_list<MultiIndex> list, MultiIndex cap) {
  return Downset::from_indices(cap, std::vector<MultiIndex>(list));
}

// Beta(a,b) density on [0,1] with the Beta function from the Gamma function.
double beta_pdf(double w, double a, double b) {
  const double B = std::tgamma(a) * std::tgamma(b) / std::tgamma(a + b);
  return std::pow(w, a - 1) * std::pow(1 - w, b - 1) / B;
}

std::vector<Integrand> corpus(std::size_t d) {
  std::vector<Integrand> out;
  out.push_back([](std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return std::exp(0.3 * s);
  });
  out.push_back([](std::span<const double> x) {
    double p = 1.0;
    for (std::size_t k = 0; k < x.size(); ++k) p *= std::cos(0.7 * x[k] / (k + 1.0));
    return p;
  });
  out.push_back([](std::span<const double> x) {
    double s = 1.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += x[k] * x[k] / (k + 2.0);
    return 1.0 / s;
  });
  out.push_back([d](std::span<const double> x) {
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) s += std::pow(10.0, -static_cast<double>(k)) * x[k] * x[k];
    return std::exp(-s);
  });
  return out;
}

}  // namespace

TEST(Adaptive, ConstantStaysAtRoot) {
  const Integrand one = [](std::span<const double>) { return 1.0; };
  for (auto fam : kFamilies) {
    const auto r = adaptive_quadrature(config(0.5, MultiIndex{3, 3}, fam), one);
    EXPECT_NEAR(r.value, 4.0, 1e-15);
    ASSERT_TRUE(r.downset);
    EXPECT_EQ(r.downset->journal(), (std::vector<MultiIndex>{{1, 1}}));
    EXPECT_EQ(r.rejected.size(), 2u);
    EXPECT_FALSE(r.truncated);
  }
}

TEST(Adaptive, ToyGradientIntegrand) {
  // (w1^2 + 10 w2^2) p(w1) p(w2) on [0,1]^2, Beta(5,5) marginals, mapped to [-1,1]^2.
  const Integrand g = [](std::span<const double> x) {
    const double w1 = 0.5 * (x[0] + 1.0), w2 = 0.5 * (x[1] + 1.0);
    return (w1 * w1 + 10.0 * w2 * w2) * beta_pdf(w1, 5, 5) * beta_pdf(w2, 5, 5) * 0.25;
  };
  const auto r = adaptive_quadrature(config(1e-10, MultiIndex{6, 6}, RuleFamily::GaussPatterson), g);
  EXPECT_NEAR(r.value, 3.0, 1e-12);
  const auto b = compute_bounds(r, config(1e-10, MultiIndex{6, 6}, RuleFamily::GaussPatterson), {}, &g);
  EXPECT_LE(std::abs(r.value - 3.0), b.posteriori);
}

TEST(Adaptive, AdditiveFiftyDimensions) {
  constexpr std::size_t d = 50;
  const Integrand g = [](std::span<const double> x) {
    double s = 0.0;
    for (double v : x) {
      const double w = 0.5 * (v + 1.0);
      s += std::exp(-w * w);
    }
    return s * std::pow(0.5, 50.0);
  };
  const auto r = adaptive_quadrature(
      config(1e-9, MultiIndex::filled(d, 8), RuleFamily::GaussPatterson), g);
  // 1D oracle: the 255-point rule on [0,1].
  const auto rule = make_rule(RuleFamily::GaussPatterson, 8);
  const double one_d = 0.5 * rule.apply([](double x) {
    const double w = 0.5 * (x + 1.0);
    return std::exp(-w * w);
  });
  EXPECT_NEAR(one_d, 0.7468241328124270, 1e-15);
  EXPECT_NEAR(r.value, 50.0 * one_d, 1e-5);
  EXPECT_LT(r.point_count, 10000u);
}

TEST(Adaptive, ExitConditionHolds) {
  for (auto fam : kFamilies) {
    for (double eps : {1e-2, 1e-4, 1e-7}) {
      const auto f = corpus(3)[2];
      const MultiIndex cap{5, 5, 5};
      const auto r = adaptive_quadrature(config(eps, cap, fam), f);
      ASSERT_TRUE(r.downset);
      const Downset& I = *r.downset;
      EXPECT_TRUE(I.is_downward_closed());
      for (const auto& i : I.journal()) {
        if (i != MultiIndex::ones(3)) EXPECT_GE(std::abs(r.surplus_log.at(i)), eps);
      }
      for (const auto& c : I.covering_elements()) {
        EXPECT_LT(std::abs(tensor_surplus(fam, c, f)), eps);
        EXPECT_TRUE(r.rejected.contains(c));
      }
      double sum = 0.0;
      for (const auto& [i, v] : r.surplus_log) sum += v;
      EXPECT_NEAR(r.value, sum, 1e-12 * std::abs(r.value));
    }
  }
}

TEST(Adaptive, Deterministic) {
  const auto f = corpus(3)[0];
  const auto cfg = config(1e-6, MultiIndex{5, 5, 5}, RuleFamily::ClenshawCurtis);
  const auto a = adaptive_quadrature(cfg, f);
  const auto b = adaptive_quadrature(cfg, f);
  EXPECT_EQ(a.downset->journal(), b.downset->journal());
  EXPECT_EQ(std::memcmp(&a.value, &b.value, sizeof(double)), 0);
  EXPECT_EQ(trace_to_json(a), trace_to_json(b));
}

TEST(Adaptive, DetectsAnisotropy) {
  const Integrand f = [](std::span<const double> x) { return x[0] * x[0] + 1e-6 * x[1] * x[1]; };
  for (auto fam : kFamilies) {
    const auto r = adaptive_quadrature(config(1e-4, MultiIndex{6, 6}, fam), f);
    int m0 = 0, m1 = 0;
    for (const auto& i : r.downset->journal()) {
      m0 = std::max(m0, i[0]);
      m1 = std::max(m1, i[1]);
    }
    EXPECT_GE(m0, m1);
    EXPECT_GT(m0, 1);
  }
}

TEST(Adaptive, BudgetTruncates) {
  const auto f = corpus(3)[1];
  auto cfg = config(1e-14, MultiIndex{8, 8, 8}, RuleFamily::GaussPatterson);
  cfg.max_evaluations = 200;
  const auto r = adaptive_quadrature(cfg, f);
  EXPECT_TRUE(r.truncated);
  EXPECT_LE(r.point_count, 200u);
  EXPECT_TRUE(r.downset->is_downward_closed());
}

TEST(Adaptive, EnvironmentOverridesBudget) {
  ::setenv("ADASGO_MAX_EVALS", "1234", 1);
  EXPECT_EQ(default_max_evaluations(), 1234u);
  ::setenv("ADASGO_MAX_EVALS", "junk", 1);
  EXPECT_EQ(default_max_evaluations(), kDefaultMaxEvaluations);
  ::unsetenv("ADASGO_MAX_EVALS");
}

TEST(Adaptive, RejectsBadConfig) {
  const auto f = corpus(2)[0];
  EXPECT_THROW(adaptive_quadrature(config(0.0, MultiIndex{3, 3}, RuleFamily::ClenshawCurtis), f), Error);
  EXPECT_THROW(adaptive_quadrature(config(1e-3, MultiIndex{9, 3}, RuleFamily::GaussPatterson), f), Error);
}

TEST(Adaptive, TraceJson) {
  const auto f = corpus(2)[0];
  const auto r = adaptive_quadrature(config(1e-3, MultiIndex{4, 4}, RuleFamily::GaussPatterson), f);
  const auto j = trace_to_json(r);
  ASSERT_EQ(j.size(), r.downset->size());
  EXPECT_EQ(j[0]["index"], nlohmann::json::array({1, 1}));
  EXPECT_DOUBLE_EQ(j.back()["value"].get<double>(), r.value);
}

TEST(Bounds, PrioriExamples) {
  auto [a, b] = priori_bound(12, 5, 0.1);
  EXPECT_DOUBLE_EQ(a, 1.2);
  EXPECT_DOUBLE_EQ(b, 0.7000000000000001);
  std::tie(a, b) = priori_bound(7, 7, 0.3);
  EXPECT_DOUBLE_EQ(a, 7 * 0.3);
  EXPECT_EQ(b, 0.0);
  std::tie(a, b) = priori_bound(1, 0, 1.0);
  EXPECT_EQ(a, 1.0);
  EXPECT_EQ(b, 1.0);
}

TEST(Bounds, SmoothnessExamples) {
  ErrorBoundParams p{1, 1.0, 1.0, std::nullopt};
  const MultiIndex cap1{2};
  const auto L1 = Downset::full_box(cap1);
  EXPECT_EQ(smoothness_bound(L1, L1, p), 0.0);
  EXPECT_DOUBLE_EQ(smoothness_bound(L1, members({MultiIndex{1}}, cap1), p), 0.75);
  EXPECT_DOUBLE_EQ(smoothness_bound(cap1, members({MultiIndex{1}}, cap1), p), 0.75);

  ErrorBoundParams p2{2, 1.0, 1.0, std::nullopt};
  const MultiIndex cap2{3, 2};
  const auto L2 = members({{1, 1}, {2, 1}, {1, 2}, {2, 2}, {3, 1}}, cap2);
  const auto I2 = members({{1, 1}, {2, 1}, {1, 2}}, cap2);
  EXPECT_DOUBLE_EQ(smoothness_bound(L2, I2, p2), 25.0 / 128.0);
}

TEST(Bounds, RhoExamples) {
  const MultiIndex cap{3, 3};
  const auto L = members({{1, 1}, {2, 1}}, cap);
  const auto I = members({{1, 1}}, cap);
  EXPECT_DOUBLE_EQ(rho_bound(L, I, 0.01, 3, 1.0).bound, 0.01);

  const auto L2 = members({{1, 1}, {2, 1}, {3, 1}}, cap);
  EXPECT_DOUBLE_EQ(rho_bound(L2, I, 0.01, 1, 1.0).bound, 0.015);

  const auto rb = rho_bound(L2, I, 0.01, 1);
  EXPECT_NEAR(rb.bound, 2 * 0.01, 1e-15);
  EXPECT_EQ(rho_bound(L, L, 0.01, 2).bound, 0.0);
}

TEST(Bounds, ClosedFormMatchesEnumeration) {
  const MultiIndex cap{4, 3, 5};
  const auto f = corpus(3)[2];
  const auto r = adaptive_quadrature(config(1e-5, cap, RuleFamily::ClenshawCurtis), f);
  const auto L = Downset::full_box(cap);
  ErrorBoundParams p{2, 1.0, 1.7, std::nullopt};
  EXPECT_NEAR(smoothness_bound(cap, *r.downset, p), smoothness_bound(L, *r.downset, p), 1e-13);
  const auto a = rho_bound(cap, *r.downset, 1e-5, 2);
  const auto b = rho_bound(L, *r.downset, 1e-5, 2);
  EXPECT_NEAR(a.bound, b.bound, 1e-15);
  EXPECT_NEAR(a.rho_min, b.rho_min, 1e-12 * b.rho_min);
}

TEST(Bounds, OrderingOnCorpus) {
  for (std::size_t d = 1; d <= 3; ++d) {
    const MultiIndex cap = MultiIndex::filled(d, 5);
    for (const auto& f : corpus(d)) {
      for (auto fam : kFamilies) {
        const double full = downset_quadrature(fam, Downset::full_box(cap), f).value;
        for (double eps : {1e-2, 1e-4, 1e-6}) {
          const auto cfg = config(eps, cap, fam);
          const auto r = adaptive_quadrature(cfg, f);
          const auto b = compute_bounds(r, cfg, {}, &f);
          // Slack covers the different summation order of the two results.
          EXPECT_LE(std::abs(full - r.value), b.posteriori + 1e-14 * std::abs(full));
          EXPECT_LE(b.posteriori, b.priori);
          EXPECT_NEAR(b.rho_form, b.posteriori, 1e-12 * std::max(1.0, b.posteriori));
          EXPECT_EQ(b.card_L, std::pow(5.0, static_cast<double>(d)));
          EXPECT_EQ(b.card_L_zero_origin, std::pow(6.0, static_cast<double>(d)));
        }
      }
    }
  }
}

TEST(Bounds, SurplusDecaySlope) {
  // |Delta_i f| for f = prod cos(w_k) along the diagonal i = (l, l): fit
  // log2|Delta| against |i|_1 and compare with -r for the trapezoidal rule,
  // whose error decays like 4^{-l} (r = 2).
  const Integrand f = [](std::span<const double> x) { return std::cos(x[0]) * std::cos(x[1]); };
  std::vector<double> xs, ys;
  for (int l = 3; l <= 8; ++l) {
    const MultiIndex i{l, l};
    xs.push_back(i.l1());
    ys.push_back(std::log2(std::abs(tensor_surplus(RuleFamily::Trapezoidal, i, f))));
  }
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxy += (xs[k] - mx) * (ys[k] - my);
    sxx += (xs[k] - mx) * (xs[k] - mx);
  }
  const double slope = sxy / sxx;
  EXPECT_NEAR(slope, -2.0, 0.3);
  // A fitted constant C then bounds every measured surplus for r = 2.
  double C = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) C = std::max(C, std::exp2(ys[k] + 2.0 * xs[k]));
  for (std::size_t k = 0; k < xs.size(); ++k) EXPECT_LE(std::exp2(ys[k]), C * std::exp2(-2.0 * xs[k]) * (1 + 1e-12));
}
