#include "adasgo/problems.hpp"

#include <cmath>
#include <fstream>

#include <boost/math/special_functions/beta.hpp>

#include "adasgo/errors.hpp"
#include "adasgo/rules1d.hpp"

namespace adasgo {

Marginal Marginal::uniform(double lower, double upper) {
  if (!(lower < upper)) throw Error(ErrorCode::InvalidProblem, "uniform marginal needs lower < upper");
  return {Kind::Uniform, 1.0, 1.0, lower, upper};
}

Marginal Marginal::beta_dist(double alpha, double beta) {
  if (!(alpha > 0.0 && beta > 0.0)) {
    throw Error(ErrorCode::InvalidProblem, "beta marginal needs positive parameters");
  }
  return {Kind::Beta, alpha, beta, 0.0, 1.0};
}

double Marginal::pdf(double w) const {
  if (w < lower || w > upper) return 0.0;
  if (kind == Kind::Uniform) return 1.0 / (upper - lower);
  const double log_b = std::lgamma(alpha) + std::lgamma(beta) - std::lgamma(alpha + beta);
  const double a_term = alpha == 1.0 ? 0.0 : (alpha - 1.0) * std::log(w);
  const double b_term = beta == 1.0 ? 0.0 : (beta - 1.0) * std::log1p(-w);
  return std::exp(a_term + b_term - log_b);
}

double Marginal::mean() const {
  if (kind == Kind::Uniform) return 0.5 * (lower + upper);
  return alpha / (alpha + beta);
}

double Marginal::variance() const {
  if (kind == Kind::Uniform) return (upper - lower) * (upper - lower) / 12.0;
  const double s = alpha + beta;
  return alpha * beta / (s * s * (s + 1.0));
}

double Marginal::quantile(double p) const {
  if (kind == Kind::Uniform) return lower + p * (upper - lower);
  return boost::math::ibeta_inv(alpha, beta, p);
}

double Problem::density(std::span<const double> w) const {
  double p = 1.0;
  for (std::size_t k = 0; k < marginals.size(); ++k) p *= marginals[k].pdf(w[k]);
  return p;
}

void validate(const Problem& problem) {
  if (problem.marginals.size() != problem.dim_w) {
    throw Error(ErrorCode::InvalidProblem, problem.name + ": one marginal per W component required");
  }
  if (!problem.h) throw Error(ErrorCode::InvalidProblem, problem.name + ": missing cost function");
  if (problem.u_box && (problem.u_box->lower.size() != problem.dim_u ||
                        problem.u_box->upper.size() != problem.dim_u)) {
    throw Error(ErrorCode::InvalidProblem, problem.name + ": box bounds have the wrong size");
  }
  const Rule1D rule = make_rule(RuleFamily::GaussPatterson, max_level(RuleFamily::GaussPatterson));
  for (const auto& m : problem.marginals) {
    const double half = 0.5 * (m.upper - m.lower);
    const double mass = half * rule.apply([&](double x) { return m.pdf(m.lower + half * (x + 1.0)); });
    if (std::abs(mass - 1.0) > 1e-8) {
      throw Error(ErrorCode::InvalidProblem,
                  problem.name + ": marginal density integrates to " + std::to_string(mass));
    }
  }
}

Problem toy_problem(double alpha, double beta) {
  Problem p;
  p.name = "toy";
  p.dim_w = 2;
  p.dim_u = 1;
  p.marginals = {Marginal::beta_dist(alpha, beta), Marginal::beta_dist(alpha, beta)};
  p.h = [](std::span<const double> u, std::span<const double> w) {
    return u[0] * u[0] + (w[0] * w[0] + 10.0 * w[1] * w[1]) * u[0];
  };
  p.grad_h = [](std::span<const double> u, std::span<const double> w, std::span<double> g) {
    g[0] = 2.0 * u[0] + w[0] * w[0] + 10.0 * w[1] * w[1];
  };
  const double m2 = p.marginals[0].second_moment();
  const double u_star = -11.0 * m2 / 2.0;
  p.u_star = std::vector<double>{u_star};
  p.f_star = u_star * u_star + 11.0 * m2 * u_star;
  validate(p);
  return p;
}

Problem additive_problem(std::size_t d) {
  if (d == 0) throw Error(ErrorCode::InvalidProblem, "additive problem needs d >= 1");
  Problem p;
  p.name = "additive";
  p.dim_w = d;
  p.dim_u = d;
  p.marginals.assign(d, Marginal::uniform());
  p.h = [](std::span<const double> u, std::span<const double> w) {
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += std::exp(-u[i] * w[i] * w[i]);
    return s;
  };
  p.grad_h = [](std::span<const double> u, std::span<const double> w, std::span<double> g) {
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double w2 = w[i] * w[i];
      g[i] = -w2 * std::exp(-u[i] * w2);
    }
  };
  p.u_box = BoxBounds{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
  p.u_star = std::vector<double>(d, 1.0);
  // int_0^1 exp(-t^2) dt = sqrt(pi)/2 erf(1)
  p.f_star = static_cast<double>(d) * 0.5 * std::sqrt(M_PI) * std::erf(1.0);
  validate(p);
  return p;
}

LQControl lq_fixture(std::size_t d) {
  LQControl s;
  s.A = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t i = 0; i + 1 < d; ++i) s.A(i + 1, i) = 0.5;
  s.B = s.C = s.P = s.Q = Eigen::MatrixXd::Identity(d, d);
  s.x0 = 1.0;
  return s;
}

namespace {

struct LQReduced {
  Eigen::MatrixXd M, N, P, Q;
  Eigen::VectorXd c0;
};

LQReduced reduce(const LQControl& s) {
  const Eigen::Index d = s.A.rows();
  if (s.A.cols() != d || s.B.rows() != d || s.B.cols() != d || s.C.rows() != d ||
      s.C.cols() != d || s.P.rows() != d || s.P.cols() != d || s.Q.rows() != d || s.Q.cols() != d) {
    throw Error(ErrorCode::DimensionMismatch, "LQ matrices must all be d x d");
  }
  const Eigen::MatrixXd IA = Eigen::MatrixXd::Identity(d, d) - s.A;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(IA);
  if (!lu.isInvertible()) throw Error(ErrorCode::SingularSystem, "I - A is singular");
  LQReduced r;
  r.M = lu.solve(s.B);
  r.N = lu.solve(s.C);
  r.P = s.P;
  r.Q = s.Q;
  r.c0 = lu.solve(Eigen::VectorXd::Unit(d, 0) * s.x0);
  return r;
}

Eigen::MatrixXd normal_matrix(const LQReduced& r) { return r.P + r.M.transpose() * r.Q * r.M; }

}  // namespace

Problem lq_control_problem(const LQControl& spec, std::vector<Marginal> marginals) {
  const auto red = std::make_shared<const LQReduced>(reduce(spec));
  const std::size_t d = spec.dim();
  if (marginals.size() != d) throw Error(ErrorCode::DimensionMismatch, "need one marginal per state");
  Eigen::LLT<Eigen::MatrixXd> llt(normal_matrix(*red));
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::SingularSystem, "P + M'QM is not positive definite");
  }

  Problem p;
  p.name = "lq";
  p.dim_w = d;
  p.dim_u = d;
  p.marginals = std::move(marginals);
  p.h = [red](std::span<const double> u, std::span<const double> w) {
    const Eigen::Map<const Eigen::VectorXd> uu(u.data(), static_cast<Eigen::Index>(u.size()));
    const Eigen::Map<const Eigen::VectorXd> ww(w.data(), static_cast<Eigen::Index>(w.size()));
    const Eigen::VectorXd x = red->M * uu + red->N * ww + red->c0;
    return uu.dot(red->P * uu) + x.dot(red->Q * x);
  };
  p.grad_h = [red](std::span<const double> u, std::span<const double> w, std::span<double> g) {
    const Eigen::Map<const Eigen::VectorXd> uu(u.data(), static_cast<Eigen::Index>(u.size()));
    const Eigen::Map<const Eigen::VectorXd> ww(w.data(), static_cast<Eigen::Index>(w.size()));
    const Eigen::VectorXd x = red->M * uu + red->N * ww + red->c0;
    Eigen::Map<Eigen::VectorXd> gg(g.data(), static_cast<Eigen::Index>(g.size()));
    gg = (red->P + red->P.transpose()) * uu + red->M.transpose() * (red->Q + red->Q.transpose()) * x;
  };
  Eigen::VectorXd mean(d);
  for (std::size_t k = 0; k < d; ++k) mean[k] = p.marginals[k].mean();
  const Eigen::VectorXd u_star = certainty_equivalence_solution(spec, mean);
  p.u_star = std::vector<double>(u_star.data(), u_star.data() + d);
  p.f_star = lq_expected_cost(spec, p.marginals, u_star);
  validate(p);
  return p;
}

Eigen::VectorXd certainty_equivalence_solution(const LQControl& spec, const Eigen::VectorXd& mean_w) {
  const LQReduced r = reduce(spec);
  if (mean_w.size() != spec.A.rows()) throw Error(ErrorCode::DimensionMismatch, "mean has wrong size");
  const Eigen::VectorXd v = r.N * mean_w + r.c0;
  const Eigen::MatrixXd K = normal_matrix(r);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
  if (!lu.isInvertible()) throw Error(ErrorCode::SingularSystem, "P + M'QM is singular");
  return lu.solve(-r.M.transpose() * r.Q * v);
}

double lq_expected_cost(const LQControl& spec, const std::vector<Marginal>& marginals,
                        const Eigen::VectorXd& u) {
  const LQReduced r = reduce(spec);
  const Eigen::Index d = spec.A.rows();
  Eigen::VectorXd mean(d), var(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    mean[k] = marginals[static_cast<std::size_t>(k)].mean();
    var[k] = marginals[static_cast<std::size_t>(k)].variance();
  }
  const Eigen::VectorXd x = r.M * u + r.N * mean + r.c0;
  // E[x'Qx] = mean part + tr(N' Q N diag(var)).
  const Eigen::MatrixXd NQN = r.N.transpose() * r.Q * r.N;
  return u.dot(r.P * u) + x.dot(r.Q * x) + (NQN.diagonal().array() * var.array()).sum();
}

MappedPoint map_to_reference(const Problem& problem, std::span<const double> w_ref) {
  MappedPoint out;
  out.w.resize(problem.dim_w);
  for (std::size_t k = 0; k < problem.dim_w; ++k) {
    const auto& m = problem.marginals[k];
    const double half = 0.5 * (m.upper - m.lower);
    out.w[k] = m.lower + half * (w_ref[k] + 1.0);
    out.jacobian *= half;
  }
  return out;
}

Integrand reference_integrand(const Problem& problem,
                              std::function<double(std::span<const double>)> g) {
  std::vector<double> lower(problem.dim_w), half(problem.dim_w);
  double jac = 1.0;
  for (std::size_t k = 0; k < problem.dim_w; ++k) {
    lower[k] = problem.marginals[k].lower;
    half[k] = 0.5 * (problem.marginals[k].upper - problem.marginals[k].lower);
    jac *= half[k];
  }
  return [marginals = problem.marginals, g = std::move(g), lower, half, jac](std::span<const double> x) {
    std::vector<double> w(x.size());
    double p = 1.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      w[k] = lower[k] + half[k] * (x[k] + 1.0);
      p *= marginals[k].pdf(w[k]);
    }
    return p == 0.0 ? 0.0 : g(w) * p * jac;
  };
}

namespace {

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, std::size_t d, const char* key) {
  if (!j.contains(key)) {
    if (std::string(key) == "A") return Eigen::MatrixXd::Zero(d, d);
    return Eigen::MatrixXd::Identity(d, d);
  }
  const auto& rows = j.at(key);
  if (rows.size() != d) throw Error(ErrorCode::InvalidProblem, std::string(key) + " must have d rows");
  Eigen::MatrixXd m(d, d);
  for (std::size_t r = 0; r < d; ++r) {
    if (rows[r].size() != d) throw Error(ErrorCode::InvalidProblem, std::string(key) + " must be square");
    for (std::size_t c = 0; c < d; ++c) m(r, c) = rows[r][c].get<double>();
  }
  return m;
}

Marginal marginal_from_json(const nlohmann::json& j) {
  const std::string kind = j.value("kind", "uniform");
  if (kind == "beta") return Marginal::beta_dist(j.at("alpha").get<double>(), j.at("beta").get<double>());
  if (kind == "uniform") return Marginal::uniform(j.value("lower", 0.0), j.value("upper", 1.0));
  throw Error(ErrorCode::InvalidProblem, "unknown marginal kind '" + kind + "'");
}

std::vector<Marginal> marginals_from_json(const nlohmann::json& j, std::size_t d) {
  if (!j.contains("marginals")) return std::vector<Marginal>(d, Marginal::beta_dist(2.0, 3.0));
  const auto& m = j.at("marginals");
  if (m.is_object()) return std::vector<Marginal>(d, marginal_from_json(m));
  if (m.size() != d) throw Error(ErrorCode::InvalidProblem, "need one marginal or d marginals");
  std::vector<Marginal> out;
  for (const auto& e : m) out.push_back(marginal_from_json(e));
  return out;
}

}  // namespace

Problem load_problem(const nlohmann::json& config) {
  try {
    const std::string type = config.at("type").get<std::string>();
    if (type == "toy") return toy_problem(config.value("alpha", 5.0), config.value("beta", 5.0));
    if (type == "additive") return additive_problem(config.value("d", std::size_t{50}));
    if (type == "lq_control") {
      const std::size_t d = config.at("d").get<std::size_t>();
      LQControl spec;
      spec.A = matrix_from_json(config, d, "A");
      spec.B = matrix_from_json(config, d, "B");
      spec.C = matrix_from_json(config, d, "C");
      spec.P = matrix_from_json(config, d, "P");
      spec.Q = matrix_from_json(config, d, "Q");
      spec.x0 = config.value("x0", 0.0);
      Problem p = lq_control_problem(spec, marginals_from_json(config, d));
      p.name = config.value("name", std::string("lq"));
      return p;
    }
    throw Error(ErrorCode::UnknownProblem, "unknown problem type '" + type + "'");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidProblem, e.what());
  }
}

Problem problem_by_name(const std::string& name) {
  const auto colon = name.find(':');
  const std::string base = name.substr(0, colon);
  auto size_arg = [&](std::size_t fallback) {
    if (colon == std::string::npos) return fallback;
    try {
      return static_cast<std::size_t>(std::stoul(name.substr(colon + 1)));
    } catch (const std::exception&) {
      throw Error(ErrorCode::UnknownProblem, "bad dimension in '" + name + "'");
    }
  };
  if (base == "toy") return toy_problem();
  if (base == "additive") return additive_problem(size_arg(50));
  if (base == "lq" || base == "lq-sym") {
    const std::size_t d = size_arg(7);
    const Marginal m = base == "lq" ? Marginal::beta_dist(2.0, 3.0) : Marginal::beta_dist(5.0, 5.0);
    Problem p = lq_control_problem(lq_fixture(d), std::vector<Marginal>(d, m));
    p.name = base;
    return p;
  }
  if (name.ends_with(".json")) {
    std::ifstream in(name);
    if (!in) throw Error(ErrorCode::UnknownProblem, "cannot open problem file '" + name + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidProblem, e.what());
    }
    return load_problem(j);
  }
  throw Error(ErrorCode::UnknownProblem, "unknown problem '" + name + "'");
}

}  // namespace adasgo
