#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "adasgo/sg_quadrature.hpp"

namespace adasgo {

/// One-dimensional marginal density of W_k on a bounded interval.
struct Marginal {
  enum class Kind { Uniform, Beta };

  Kind kind = Kind::Uniform;
  double alpha = 1.0;
  double beta = 1.0;
  double lower = 0.0;
  double upper = 1.0;

  static Marginal uniform(double lower = 0.0, double upper = 1.0);
  /// Beta(alpha, beta) on [0, 1].
  static Marginal beta_dist(double alpha, double beta);

  double pdf(double w) const;
  double mean() const;
  double variance() const;
  double second_moment() const { return variance() + mean() * mean(); }
  /// Inverse CDF for p in (0, 1).
  double quantile(double p) const;
};

using CostFn = std::function<double(std::span<const double> u, std::span<const double> w)>;
using CostGradFn =
    std::function<void(std::span<const double> u, std::span<const double> w, std::span<double> grad)>;

struct BoxBounds {
  std::vector<double> lower;
  std::vector<double> upper;
};

/// min_u E[h(u, W)] with W distributed on a box with product density.
struct Problem {
  std::string name;
  std::size_t dim_w = 0;
  std::size_t dim_u = 0;
  std::vector<Marginal> marginals;
  CostFn h;
  /// Optional analytic gradient of h in u.
  CostGradFn grad_h;
  std::optional<BoxBounds> u_box;
  std::optional<std::vector<double>> u_star;
  std::optional<double> f_star;

  double density(std::span<const double> w) const;
};

/// Throws InvalidProblem unless every marginal integrates to 1 within 1e-8
/// (255-point Gauss-Patterson on its interval) and the sizes agree.
void validate(const Problem& problem);

/// E[u^2 + (W1^2 + 10 W2^2) u] with W_k ~ Beta(alpha, beta).
Problem toy_problem(double alpha = 5.0, double beta = 5.0);

/// E[sum_i exp(-u_i W_i^2)] with W ~ U(0,1)^d and u in [0,1]^d.
Problem additive_problem(std::size_t d);

/// X = A X + B u + C W + x0 e0, h = u'Pu + x'Qx.
struct LQControl {
  Eigen::MatrixXd A, B, C, P, Q;
  double x0 = 0.0;

  std::size_t dim() const { return static_cast<std::size_t>(A.rows()); }
};

/// A = 0.5 * subdiagonal shift, B = C = P = Q = I, x0 = 1.
LQControl lq_fixture(std::size_t d = 7);

/// Throws SingularSystem if I - A is singular or P + M'QM is not positive
/// definite.
Problem lq_control_problem(const LQControl& spec, std::vector<Marginal> marginals);

/// Solves (P + M'QM) u = -M'Q v with M = (I-A)^{-1}B, v = (I-A)^{-1}(C mean + x0 e0).
Eigen::VectorXd certainty_equivalence_solution(const LQControl& spec, const Eigen::VectorXd& mean_w);

/// Exact E[h(u, W)] for the LQ problem given marginal means and variances.
double lq_expected_cost(const LQControl& spec, const std::vector<Marginal>& marginals,
                        const Eigen::VectorXd& u);

struct MappedPoint {
  std::vector<double> w;
  double jacobian = 1.0;
};

/// Affine map from [-1,1]^d onto the problem's W box.
MappedPoint map_to_reference(const Problem& problem, std::span<const double> w_ref);

/// g(w(x)) p(w(x)) |J| as an integrand on [-1,1]^d.
Integrand reference_integrand(const Problem& problem,
                              std::function<double(std::span<const double>)> g);

/// Builds a problem from JSON; see README for the schema.
Problem load_problem(const nlohmann::json& config);

/// "toy", "additive[:d]", "lq[:d]", "lq-sym[:d]" or a path to a JSON file.
Problem problem_by_name(const std::string& name);

}  // namespace adasgo
