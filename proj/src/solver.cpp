#include "adasgo/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <ostream>
#include <sstream>

#include "adasgo/errors.hpp"
#include "adasgo/monte_carlo.hpp"

namespace adasgo {

std::string_view to_string(QuadMethod method) {
  switch (method) {
    case QuadMethod::Adaptive: return "adaptive";
    case QuadMethod::SparseGrid: return "sparse_grid";
    case QuadMethod::Product: return "product";
    case QuadMethod::MonteCarlo: return "monte_carlo";
  }
  return "?";
}

std::string_view to_string(DerivativeMode mode) {
  switch (mode) {
    case DerivativeMode::QuadThenDiff: return "quad-then-diff";
    case DerivativeMode::DiffThenQuad: return "diff-then-quad";
    case DerivativeMode::Exact: return "exact";
  }
  return "?";
}

DerivativeMode parse_derivative_mode(std::string_view name) {
  if (name == "quad-then-diff") return DerivativeMode::QuadThenDiff;
  if (name == "diff-then-quad") return DerivativeMode::DiffThenQuad;
  if (name == "exact") return DerivativeMode::Exact;
  throw Error(ErrorCode::InvalidArgument, "unknown derivative scheme '" + std::string(name) + "'");
}

std::string_view to_string(Engine engine) {
  switch (engine) {
    case Engine::Newton: return "newton";
    case Engine::BFGS: return "bfgs";
    case Engine::ProjectedBFGS: return "projected_bfgs";
  }
  return "?";
}

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIterations: return "max_iterations";
    case SolveStatus::TrendStop: return "trend_stop";
    case SolveStatus::NoProgress: return "no_progress";
    case SolveStatus::SingularHessian: return "singular_hessian";
    case SolveStatus::LineSearchFailed: return "line_search_failed";
  }
  return "?";
}

QuadResult expectation(const Problem& problem, const QuadSpec& spec,
                       const std::function<double(std::span<const double>)>& g,
                       std::uint64_t stream) {
  const std::size_t d = problem.dim_w;
  switch (spec.method) {
    case QuadMethod::MonteCarlo:
      return monte_carlo_quadrature(problem.marginals, g, spec.samples, spec.seed,
                                    spec.fresh_samples ? stream : 0);
    case QuadMethod::Adaptive: {
      AdaptiveConfig cfg;
      cfg.epsilon = spec.epsilon;
      cfg.cap = MultiIndex::filled(d, std::min(spec.level_cap, max_level(spec.family)));
      cfg.family = spec.family;
      cfg.max_evaluations = spec.max_evaluations;
      return adaptive_quadrature(cfg, reference_integrand(problem, g));
    }
    case QuadMethod::SparseGrid:
      return classical_sparse_grid(spec.family, spec.level, d, reference_integrand(problem, g),
                                   spec.max_evaluations);
    case QuadMethod::Product:
      return product_rule(spec.family, MultiIndex::filled(d, spec.level),
                          reference_integrand(problem, g), spec.max_evaluations);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown quadrature method");
}

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

using WFunction = std::function<double(std::span<const double>)>;

WFunction cost_at(const Problem& p, Eigen::VectorXd u) {
  return [&h = p.h, u = std::move(u)](std::span<const double> w) {
    return h(std::span<const double>(u.data(), static_cast<std::size_t>(u.size())), w);
  };
}

void check_inside(const Problem& p, const Eigen::VectorXd& u) {
  if (static_cast<std::size_t>(u.size()) != p.dim_u) {
    throw Error(ErrorCode::DimensionMismatch, "u has the wrong dimension");
  }
  if (!u.allFinite()) throw Error(ErrorCode::NonFiniteValue, "u is not finite");
  if (!p.u_box) return;
  for (Eigen::Index q = 0; q < u.size(); ++q) {
    const auto k = static_cast<std::size_t>(q);
    if (u[q] < p.u_box->lower[k] || u[q] > p.u_box->upper[k]) {
      throw Error(ErrorCode::DomainViolation, "u lies outside the box");
    }
  }
}

// Signed step of magnitude `reach`/`span_factor` that keeps u + span_factor*step
// inside the box; backward when forward would leave it.
double signed_step(const Problem& p, const Eigen::VectorXd& u, Eigen::Index q, double h,
                   double span_factor, bool& flipped) {
  if (!p.u_box) return h;
  const auto k = static_cast<std::size_t>(q);
  if (u[q] + span_factor * h <= p.u_box->upper[k]) return h;
  if (u[q] - span_factor * h >= p.u_box->lower[k]) {
    flipped = true;
    return -h;
  }
  throw Error(ErrorCode::DomainViolation, "box is narrower than the difference step");
}

bool central_fits(const Problem& p, const Eigen::VectorXd& u, Eigen::Index q, double h) {
  if (!p.u_box) return true;
  const auto k = static_cast<std::size_t>(q);
  return u[q] + h <= p.u_box->upper[k] && u[q] - h >= p.u_box->lower[k];
}

double scaled(double base, double uq) { return base * std::max(1.0, std::abs(uq)); }

void tally(const QuadResult& r, std::size_t& points, std::size_t& calls) {
  points += r.point_count;
  ++calls;
}

}  // namespace

GradientEstimate estimate_gradient(const Problem& problem, const Eigen::VectorXd& u,
                                   const DerivativeScheme& scheme, const QuadSpec& quad,
                                   std::uint64_t stream, const std::vector<QuadSpec>& components) {
  check_inside(problem, u);
  const auto n = static_cast<Eigen::Index>(problem.dim_u);
  if (!components.empty() && components.size() != problem.dim_u) {
    throw Error(ErrorCode::DimensionMismatch, "need one quadrature spec per gradient component");
  }
  auto spec_for = [&](Eigen::Index q) -> const QuadSpec& {
    return components.empty() ? quad : components[static_cast<std::size_t>(q)];
  };

  GradientEstimate out;
  out.value = Eigen::VectorXd::Zero(n);
  out.downsets.resize(problem.dim_u);
  const WFunction base = cost_at(problem, u);

  if (scheme.mode == DerivativeMode::Exact) {
    if (!problem.grad_h) throw Error(ErrorCode::InvalidArgument, problem.name + " has no analytic gradient");
    for (Eigen::Index q = 0; q < n; ++q) {
      const WFunction gq = [&, q](std::span<const double> w) {
        std::vector<double> g(problem.dim_u);
        problem.grad_h(std::span<const double>(u.data(), problem.dim_u), w, g);
        return g[static_cast<std::size_t>(q)];
      };
      QuadResult r = expectation(problem, spec_for(q), gq, stream);
      tally(r, out.points, out.quad_calls);
      out.value[q] = r.value;
      out.downsets[static_cast<std::size_t>(q)] = std::move(r.downset);
    }
    return out;
  }

  std::optional<double> shared_f0;
  for (Eigen::Index q = 0; q < n; ++q) {
    const bool central = scheme.central &&
                         central_fits(problem, u, q, scaled(scheme.fd_step.value_or(std::cbrt(kEps)), u[q]));
    double h = 0.0;
    if (central) {
      h = scaled(scheme.fd_step.value_or(std::cbrt(kEps)), u[q]);
    } else {
      h = signed_step(problem, u, q, scaled(scheme.fd_step.value_or(std::sqrt(kEps)), u[q]), 1.0,
                      out.step_flipped);
    }
    Eigen::VectorXd up = u;
    up[q] += h;
    Eigen::VectorXd down = u;
    if (central) down[q] -= h;
    const double denom = central ? 2.0 * h : h;
    const QuadSpec& spec = spec_for(q);

    if (scheme.mode == DerivativeMode::DiffThenQuad) {
      const WFunction f_up = cost_at(problem, up);
      const WFunction f_down = central ? cost_at(problem, down) : base;
      const WFunction dq = [&](std::span<const double> w) { return (f_up(w) - f_down(w)) / denom; };
      QuadResult r = expectation(problem, spec, dq, stream);
      tally(r, out.points, out.quad_calls);
      out.value[q] = r.value;
      out.downsets[static_cast<std::size_t>(q)] = std::move(r.downset);
    } else {
      QuadResult r_up = expectation(problem, spec, cost_at(problem, up), stream);
      tally(r_up, out.points, out.quad_calls);
      double lower_value = 0.0;
      if (central) {
        const QuadResult r_down = expectation(problem, spec, cost_at(problem, down), stream);
        tally(r_down, out.points, out.quad_calls);
        lower_value = r_down.value;
      } else if (components.empty() && shared_f0) {
        lower_value = *shared_f0;
      } else {
        const QuadResult r0 = expectation(problem, spec, base, stream);
        tally(r0, out.points, out.quad_calls);
        lower_value = r0.value;
        if (components.empty()) shared_f0 = r0.value;
      }
      out.value[q] = (r_up.value - lower_value) / denom;
      out.downsets[static_cast<std::size_t>(q)] = std::move(r_up.downset);
    }
  }
  return out;
}

double condition_number(const Eigen::MatrixXd& symmetric) {
  if (symmetric.size() == 0) return 1.0;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetric, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd mags = es.eigenvalues().cwiseAbs();
  const double lo = mags.minCoeff(), hi = mags.maxCoeff();
  if (hi == 0.0 || lo == 0.0) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

HessianEstimate estimate_hessian(const Problem& problem, const Eigen::VectorXd& u,
                                 const DerivativeScheme& scheme, const QuadSpec& quad,
                                 std::uint64_t stream,
                                 const std::map<std::pair<int, int>, QuadSpec>& components) {
  check_inside(problem, u);
  const auto n = static_cast<Eigen::Index>(problem.dim_u);
  auto spec_for = [&](Eigen::Index i, Eigen::Index j) -> const QuadSpec& {
    const auto key = std::make_pair(static_cast<int>(std::min(i, j)), static_cast<int>(std::max(i, j)));
    const auto it = components.find(key);
    return it == components.end() ? quad : it->second;
  };

  HessianEstimate out;
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);

  if (scheme.mode == DerivativeMode::Exact) {
    if (!problem.grad_h) throw Error(ErrorCode::InvalidArgument, problem.name + " has no analytic gradient");
    for (Eigen::Index j = 0; j < n; ++j) {
      const double s = signed_step(problem, u, j, scaled(scheme.fd_step.value_or(std::sqrt(kEps)), u[j]),
                                   1.0, out.step_flipped);
      Eigen::VectorXd up = u;
      up[j] += s;
      for (Eigen::Index i = 0; i < n; ++i) {
        const WFunction dij = [&, i](std::span<const double> w) {
          std::vector<double> g0(problem.dim_u), g1(problem.dim_u);
          problem.grad_h(std::span<const double>(u.data(), problem.dim_u), w, g0);
          problem.grad_h(std::span<const double>(up.data(), problem.dim_u), w, g1);
          const auto k = static_cast<std::size_t>(i);
          return (g1[k] - g0[k]) / s;
        };
        const QuadResult r = expectation(problem, spec_for(i, j), dij, stream);
        tally(r, out.points, out.quad_calls);
        H(i, j) = r.value;
      }
    }
  } else {
    std::vector<double> step(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      step[static_cast<std::size_t>(i)] =
          signed_step(problem, u, i, scaled(scheme.fd_step.value_or(std::pow(kEps, 0.25)), u[i]), 2.0,
                      out.step_flipped);
    }
    auto shifted = [&](Eigen::Index i, Eigen::Index j) {
      Eigen::VectorXd x = u;
      if (i >= 0) x[i] += step[static_cast<std::size_t>(i)];
      if (j >= 0) x[j] += step[static_cast<std::size_t>(j)];
      return x;
    };
    // Memoised quadrature values of h at shifted points (quad-then-diff).
    std::map<std::tuple<Eigen::Index, Eigen::Index, const QuadSpec*>, double> values;
    auto value_at = [&](Eigen::Index i, Eigen::Index j, const QuadSpec& spec) {
      const auto key = std::make_tuple(std::min(i, j), std::max(i, j), &spec);
      if (auto it = values.find(key); it != values.end()) return it->second;
      const QuadResult r = expectation(problem, spec, cost_at(problem, shifted(i, j)), stream);
      tally(r, out.points, out.quad_calls);
      values.emplace(key, r.value);
      return r.value;
    };
    const WFunction f00 = cost_at(problem, u);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i; j < n; ++j) {
        const double si = step[static_cast<std::size_t>(i)], sj = step[static_cast<std::size_t>(j)];
        const QuadSpec& spec = spec_for(i, j);
        if (scheme.mode == DerivativeMode::DiffThenQuad) {
          const WFunction fij = cost_at(problem, shifted(i, j));
          const WFunction fi = cost_at(problem, shifted(i, -1));
          const WFunction fj = cost_at(problem, shifted(j, -1));
          const WFunction d2 = [&](std::span<const double> w) {
            return (fij(w) - fi(w) - fj(w) + f00(w)) / (si * sj);
          };
          const QuadResult r = expectation(problem, spec, d2, stream);
          tally(r, out.points, out.quad_calls);
          H(i, j) = r.value;
        } else {
          H(i, j) = (value_at(i, j, spec) - value_at(i, -1, spec) - value_at(j, -1, spec) +
                     value_at(-1, -1, spec)) /
                    (si * sj);
        }
        H(j, i) = H(i, j);
      }
    }
  }
  out.value = 0.5 * (H + H.transpose());
  out.kappa = condition_number(out.value);
  return out;
}

// ---------------------------------------------------------------------------
// Line search

std::optional<double> quadratic_exact_step(double phi0, double dphi0, double phi1) {
  const double curvature = phi1 - phi0 - dphi0;
  if (!(curvature > 0.0)) return std::nullopt;
  return -dphi0 / (2.0 * curvature);
}

LineSearchResult armijo_backtracking(const std::function<double(double)>& phi, double phi0,
                                     double dphi0, double c1, int max_evaluations) {
  LineSearchResult r;
  double alpha = 1.0;
  for (int k = 0; k < max_evaluations; ++k) {
    const double v = phi(alpha);
    ++r.evaluations;
    if (v <= phi0 + c1 * alpha * dphi0) {
      r.alpha = alpha;
      r.phi = v;
      r.success = true;
      return r;
    }
    alpha *= 0.5;
  }
  return r;
}

namespace {

// Minimiser of the quadratic through (a, fa) with slope ga and (b, fb),
// clamped to the central 80% of the interval.
double interpolate(double a, double fa, double ga, double b, double fb) {
  const double lo = std::min(a, b), hi = std::max(a, b);
  const double width = hi - lo;
  const double dx = b - a;
  const double denom = 2.0 * (fb - fa - ga * dx);
  double t = denom > 0.0 ? a - ga * dx * dx / denom : 0.5 * (a + b);
  if (!std::isfinite(t)) t = 0.5 * (a + b);
  return std::clamp(t, lo + 0.1 * width, hi - 0.1 * width);
}

}  // namespace

LineSearchResult strong_wolfe_search(const LineFunction& phi, double phi0, double dphi0,
                                     const WolfeParams& params, double alpha0) {
  LineSearchResult r;
  if (!(dphi0 < 0.0)) return r;
  const double armijo_slope = params.c1 * dphi0;
  const double curvature = -params.c2 * dphi0;

  auto eval = [&](double a) {
    ++r.evaluations;
    return phi(a);
  };
  auto accept = [&](double a, double v, double g) {
    r.alpha = a;
    r.phi = v;
    r.dphi = g;
    r.success = true;
    return r;
  };
  auto zoom = [&](double lo, double f_lo, double g_lo, double hi, double f_hi) {
    while (r.evaluations < params.max_evaluations) {
      const double a = interpolate(lo, f_lo, g_lo, hi, f_hi);
      const auto [v, g] = eval(a);
      if (v > phi0 + a * armijo_slope || v >= f_lo) {
        hi = a;
        f_hi = v;
      } else {
        if (std::abs(g) <= curvature) return accept(a, v, g);
        if (g * (hi - lo) >= 0.0) {
          hi = lo;
          f_hi = f_lo;
        }
        lo = a;
        f_lo = v;
        g_lo = g;
      }
      if (std::abs(hi - lo) < 1e-16 * std::max(1.0, std::abs(lo))) break;
    }
    return r;
  };

  double prev = 0.0, f_prev = phi0, g_prev = dphi0;
  double alpha = alpha0;
  for (int k = 0; r.evaluations < params.max_evaluations; ++k) {
    const auto [v, g] = eval(alpha);
    if (v > phi0 + alpha * armijo_slope || (k > 0 && v >= f_prev)) {
      return zoom(prev, f_prev, g_prev, alpha, v);
    }
    if (std::abs(g) <= curvature) return accept(alpha, v, g);
    if (g >= 0.0) return zoom(alpha, v, g, prev, f_prev);
    prev = alpha;
    f_prev = v;
    g_prev = g;
    alpha *= 2.0;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Solver sessions

Eigen::VectorXd projected_step(const Eigen::VectorXd& u, const BoxBounds& box) {
  Eigen::VectorXd out = u;
  for (Eigen::Index q = 0; q < u.size(); ++q) {
    const auto k = static_cast<std::size_t>(q);
    out[q] = std::clamp(u[q], box.lower[k], box.upper[k]);
  }
  return out;
}

std::size_t SolverTrace::total_points() const {
  std::size_t s = 0;
  for (const auto& r : records) s += r.points;
  return s;
}

std::size_t SolverTrace::total_quad_calls() const {
  std::size_t s = 0;
  for (const auto& r : records) s += r.quad_calls;
  return s;
}

double SolverTrace::average_points() const {
  const std::size_t calls = total_quad_calls();
  return calls == 0 ? 0.0 : static_cast<double>(total_points()) / static_cast<double>(calls);
}

nlohmann::json to_json(const IterationRecord& r) {
  nlohmann::json j{{"iter", r.iteration},
                   {"u", r.u},
                   {"gradient", r.gradient},
                   {"grad_norm", r.grad_norm},
                   {"objective", r.objective},
                   {"kappa", std::isfinite(r.kappa) ? nlohmann::json(r.kappa) : nlohmann::json("inf")},
                   {"matrix", r.matrix},
                   {"points", r.points},
                   {"quad_calls", r.quad_calls},
                   {"objective_points", r.objective_points},
                   {"probe_points", r.probe_points},
                   {"gradient_downset_sizes", r.gradient_downset_sizes},
                   {"line_search_evaluations", r.line_search_evaluations},
                   {"step_length", r.step_length},
                   {"armijo_fallback", r.armijo_fallback},
                   {"update_skipped", r.update_skipped},
                   {"step_flipped", r.step_flipped},
                   {"trend_stop", r.trend_stop}};
  j["probe"] = r.probe ? nlohmann::json(*r.probe) : nlohmann::json(nullptr);
  if (!r.gradient_downsets.empty()) j["gradient_downsets"] = r.gradient_downsets;
  return j;
}

void SolverTrace::write_jsonl(std::ostream& os) const {
  for (const auto& r : records) os << to_json(r).dump() << '\n';
}

void SolverTrace::write_summary_csv(std::ostream& os) const {
  os << "iter,grad_norm,objective,points,kappa\n";
  os.precision(17);
  for (const auto& r : records) {
    os << r.iteration << ',' << r.grad_norm << ',' << r.objective << ',' << r.points << ','
       << r.kappa << '\n';
  }
}

namespace {

enum Role : std::uint64_t { kObjective = 0, kGradient = 1, kHessian = 2, kProbe = 3 };

std::string spec_key(const QuadSpec& s) {
  std::ostringstream os;
  os.precision(17);
  os << static_cast<int>(s.method) << '/' << static_cast<int>(s.family) << '/' << s.epsilon << '/'
     << s.level << '/' << s.level_cap << '/' << s.samples << '/' << s.seed << '/' << s.fresh_samples
     << '/' << s.max_evaluations;
  return os.str();
}

std::string vector_key(const Eigen::VectorXd& u) {
  std::string k(static_cast<std::size_t>(u.size()) * sizeof(double), '\0');
  std::memcpy(k.data(), u.data(), k.size());
  return k;
}

// Shared bookkeeping of one solve: quadrature specs per iteration, Monte
// Carlo streams, memoised objective and gradient values, cost counters.
class Session {
 public:
  Session(const Problem& problem, const SolverConfig& cfg) : problem_(problem), cfg_(cfg) {
    if (cfg.trend.enabled) {
      if (cfg.trend.probe) {
        probe_ = *cfg.trend.probe;
      } else {
        probe_ = cfg.quad;
        probe_.epsilon = cfg.quad.epsilon / 4.0;
      }
      monitor_.emplace(cfg.trend.patience);
    }
  }

  QuadSpec at(int p, const QuadSpec& base) const { return cfg_.schedule ? cfg_.schedule(p, base) : base; }

  std::uint64_t stream(int p, Role role) const {
    const Role effective = cfg_.shared_seed && role != kProbe ? kObjective : role;
    return static_cast<std::uint64_t>(p) * 4 + effective;
  }

  double objective(const Eigen::VectorXd& u, int p) {
    const QuadSpec spec = at(p, cfg_.quad);
    const std::string key = spec_key(spec) + '#' + effective_stream(spec, p, kObjective) + vector_key(u);
    if (auto it = objective_cache_.find(key); it != objective_cache_.end()) return it->second;
    const QuadResult r = expectation(problem_, spec, cost_at(problem_, u), stream(p, kObjective));
    points_ += r.point_count;
    objective_points_ += r.point_count;
    ++calls_;
    objective_cache_.emplace(key, r.value);
    return r.value;
  }

  const GradientEstimate& gradient(const Eigen::VectorXd& u, int p) {
    const QuadSpec spec = at(p, cfg_.gradient_quad.value_or(cfg_.quad));
    std::vector<QuadSpec> comps;
    std::string key = spec_key(spec);
    for (const auto& c : cfg_.gradient_components) {
      comps.push_back(at(p, c));
      key += '|' + spec_key(comps.back());
    }
    key += '#' + effective_stream(spec, p, kGradient) + vector_key(u);
    if (auto it = gradient_cache_.find(key); it != gradient_cache_.end()) return it->second;
    GradientEstimate g = estimate_gradient(problem_, u, cfg_.scheme, spec, stream(p, kGradient), comps);
    points_ += g.points;
    calls_ += g.quad_calls;
    flipped_ = flipped_ || g.step_flipped;
    return gradient_cache_.emplace(key, std::move(g)).first->second;
  }

  HessianEstimate hessian(const Eigen::VectorXd& u, int p) {
    const QuadSpec spec = at(p, cfg_.hessian_quad.value_or(cfg_.quad));
    std::map<std::pair<int, int>, QuadSpec> comps;
    for (const auto& [k, c] : cfg_.hessian_components) comps.emplace(k, at(p, c));
    HessianEstimate h = estimate_hessian(problem_, u, cfg_.scheme, spec, stream(p, kHessian), comps);
    points_ += h.points;
    calls_ += h.quad_calls;
    flipped_ = flipped_ || h.step_flipped;
    return h;
  }

  /// Fills the cost counters and probe of `rec`, appends it, and runs the
  /// trend monitor. Returns the stop decision when the solve must halt.
  std::optional<std::size_t> commit(IterationRecord rec, const Eigen::VectorXd& u, int p,
                                     const GradientEstimate* grad) {
    rec.iteration = p;
    rec.u.assign(u.data(), u.data() + u.size());
    rec.points = points_;
    rec.quad_calls = calls_;
    rec.objective_points = objective_points_;
    rec.step_flipped = flipped_;
    points_ = calls_ = objective_points_ = 0;
    flipped_ = false;
    if (grad) {
      for (const auto& d : grad->downsets) {
        rec.gradient_downset_sizes.push_back(d ? d->size() : 0);
        if (cfg_.record_downsets && d) rec.gradient_downsets.push_back(d->to_json());
      }
    }
    std::optional<std::size_t> halt;
    if (monitor_) {
      const QuadSpec spec = at(p, probe_);
      const QuadResult r = expectation(problem_, spec, cost_at(problem_, u), stream(p, kProbe));
      rec.probe = r.value;
      rec.probe_points = r.point_count;
      const auto decision = monitor_->push(r.value);
      if (decision.stop && !first_stop_) {
        first_stop_ = decision.at_iteration;
        rec.trend_stop = true;
        if (cfg_.trend.halt) halt = decision.at_iteration;
      }
    }
    trace_.records.push_back(std::move(rec));
    return halt;
  }

  SolveResult finish(const Eigen::VectorXd& u, double objective, SolveStatus status, int iterations) {
    SolveResult out;
    out.u = u;
    out.objective = objective;
    out.status = status;
    out.iterations = iterations;
    if (first_stop_) out.stop_iteration = static_cast<int>(*first_stop_);
    out.trace = std::move(trace_);
    return out;
  }

  SolveResult finish_at_trend(std::size_t at, int iterations) {
    const auto& rec = trace_.records.at(at);
    const Eigen::VectorXd u = Eigen::Map<const Eigen::VectorXd>(rec.u.data(), static_cast<Eigen::Index>(rec.u.size()));
    return finish(u, rec.objective, SolveStatus::TrendStop, iterations);
  }

 private:
  std::string effective_stream(const QuadSpec& spec, int p, Role role) const {
    if (spec.method != QuadMethod::MonteCarlo || !spec.fresh_samples) return "-";
    return std::to_string(stream(p, role));
  }

  const Problem& problem_;
  const SolverConfig& cfg_;
  QuadSpec probe_;
  std::optional<TrendMonitor> monitor_;
  std::optional<std::size_t> first_stop_;
  std::map<std::string, double> objective_cache_;
  std::map<std::string, GradientEstimate> gradient_cache_;
  std::size_t points_ = 0;
  std::size_t calls_ = 0;
  std::size_t objective_points_ = 0;
  bool flipped_ = false;
  SolverTrace trace_;
};

std::vector<double> flatten(const Eigen::MatrixXd& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  return out;
}

IterationRecord make_record(const Eigen::VectorXd& g, double grad_norm, double objective) {
  IterationRecord rec;
  rec.gradient.assign(g.data(), g.data() + g.size());
  rec.grad_norm = grad_norm;
  rec.objective = objective;
  return rec;
}

void check_start(const Problem& problem, const Eigen::VectorXd& u0) {
  if (static_cast<std::size_t>(u0.size()) != problem.dim_u) {
    throw Error(ErrorCode::DimensionMismatch, "initial point has the wrong dimension");
  }
  if (!u0.allFinite()) throw Error(ErrorCode::NonFiniteValue, "initial point is not finite");
}

// Inverse BFGS update; false when the curvature pair is rejected.
bool bfgs_update(Eigen::MatrixXd& H, const Eigen::VectorXd& s, const Eigen::VectorXd& y, bool first) {
  const double sy = s.dot(y);
  if (!(sy > 1e-12 * s.norm() * y.norm())) return false;
  if (first) H = (sy / y.squaredNorm()) * Eigen::MatrixXd::Identity(H.rows(), H.cols());
  const double rho = 1.0 / sy;
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(H.rows(), H.cols());
  H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
  H = 0.5 * (H + H.transpose());
  return true;
}

}  // namespace

SolveResult newton_solve(const Problem& problem, const Eigen::VectorXd& u0, const SolverConfig& cfg) {
  check_start(problem, u0);
  Session session(problem, cfg);
  Eigen::VectorXd u = problem.u_box ? projected_step(u0, *problem.u_box) : u0;
  for (int p = 0;; ++p) {
    const GradientEstimate& grad = session.gradient(u, p);
    const Eigen::VectorXd G = grad.value;
    const double F = session.objective(u, p);
    IterationRecord rec = make_record(G, G.norm(), F);
    const bool done = G.norm() <= cfg.grad_tol || p >= cfg.max_iters;
    std::optional<HessianEstimate> hess;
    if (!done) {
      hess = session.hessian(u, p);
      rec.kappa = hess->kappa;
      rec.matrix = flatten(hess->value);
    }
    if (auto at = session.commit(std::move(rec), u, p, &grad)) return session.finish_at_trend(*at, p);
    if (G.norm() <= cfg.grad_tol) return session.finish(u, F, SolveStatus::Converged, p);
    if (p >= cfg.max_iters) return session.finish(u, F, SolveStatus::MaxIterations, p);
    if (hess->singular()) return session.finish(u, F, SolveStatus::SingularHessian, p);

    const Eigen::VectorXd z = hess->value.fullPivLu().solve(-G);
    Eigen::VectorXd next = u + z;
    if (problem.u_box) next = projected_step(next, *problem.u_box);
    if ((next - u).norm() < 1e-15) return session.finish(u, F, SolveStatus::NoProgress, p);
    u = next;
  }
}

SolveResult bfgs_solve(const Problem& problem, const Eigen::VectorXd& u0, const SolverConfig& cfg) {
  check_start(problem, u0);
  if (!(0.0 < cfg.wolfe.c1 && cfg.wolfe.c1 < cfg.wolfe.c2 && cfg.wolfe.c2 < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "Wolfe constants need 0 < c1 < c2 < 1");
  }
  Session session(problem, cfg);
  const auto n = static_cast<Eigen::Index>(problem.dim_u);
  Eigen::VectorXd u = u0;
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  bool first_update = true;
  IterationRecord pending;  // line-search details carried into the next record

  for (int p = 0;; ++p) {
    const GradientEstimate& grad = session.gradient(u, p);
    const Eigen::VectorXd G = grad.value;
    const double F = session.objective(u, p);
    IterationRecord rec = make_record(G, G.norm(), F);
    rec.kappa = condition_number(H);
    rec.matrix = flatten(H);
    rec.line_search_evaluations = pending.line_search_evaluations;
    rec.step_length = pending.step_length;
    rec.armijo_fallback = pending.armijo_fallback;
    rec.update_skipped = pending.update_skipped;
    pending = IterationRecord{};
    if (auto at = session.commit(std::move(rec), u, p, &grad)) return session.finish_at_trend(*at, p);
    if (G.norm() <= cfg.grad_tol) return session.finish(u, F, SolveStatus::Converged, p);
    if (p >= cfg.max_iters) return session.finish(u, F, SolveStatus::MaxIterations, p);

    Eigen::VectorXd d = -H * G;
    if (!(G.dot(d) < 0.0)) {
      H.setIdentity();
      first_update = true;
      d = -G;
    }
    const double dphi0 = G.dot(d);
    const LineFunction phi = [&](double a) {
      const Eigen::VectorXd x = u + a * d;
      const double v = session.objective(x, p);
      return std::make_pair(v, session.gradient(x, p).value.dot(d));
    };

    LineSearchResult ls;
    if (cfg.line_search == LineSearchKind::ExactQuadratic) {
      const double phi1 = session.objective(u + d, p);
      if (auto a = quadratic_exact_step(F, dphi0, phi1)) {
        ls.alpha = *a;
        ls.success = true;
        ls.evaluations = 1;
      }
    }
    if (!ls.success) ls = strong_wolfe_search(phi, F, dphi0, cfg.wolfe);
    if (!ls.success) {
      const int spent = ls.evaluations;
      ls = armijo_backtracking([&](double a) { return session.objective(u + a * d, p); }, F, dphi0,
                               cfg.wolfe.c1);
      ls.evaluations += spent;
      pending.armijo_fallback = true;
      if (!ls.success) return session.finish(u, F, SolveStatus::LineSearchFailed, p);
    }
    pending.line_search_evaluations = ls.evaluations;
    pending.step_length = ls.alpha;

    const Eigen::VectorXd next = u + ls.alpha * d;
    const Eigen::VectorXd s = next - u;
    if (s.norm() < 1e-15) return session.finish(u, F, SolveStatus::NoProgress, p);
    const Eigen::VectorXd y = session.gradient(next, p + 1).value - G;
    if (bfgs_update(H, s, y, first_update)) {
      first_update = false;
    } else {
      pending.update_skipped = true;
    }
    u = next;
  }
}

SolveResult projected_bfgs_solve(const Problem& problem, const Eigen::VectorXd& u0,
                                 const SolverConfig& cfg) {
  check_start(problem, u0);
  if (!problem.u_box) return bfgs_solve(problem, u0, cfg);
  const BoxBounds& box = *problem.u_box;
  Session session(problem, cfg);
  const auto n = static_cast<Eigen::Index>(problem.dim_u);
  Eigen::VectorXd u = projected_step(u0, box);
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  bool first_update = true;
  IterationRecord pending;

  for (int p = 0;; ++p) {
    const GradientEstimate& grad = session.gradient(u, p);
    const Eigen::VectorXd G = grad.value;
    const double F = session.objective(u, p);
    const Eigen::VectorXd pg = projected_step(u - G, box) - u;
    IterationRecord rec = make_record(G, pg.norm(), F);
    rec.kappa = condition_number(H);
    rec.matrix = flatten(H);
    rec.line_search_evaluations = pending.line_search_evaluations;
    rec.step_length = pending.step_length;
    rec.update_skipped = pending.update_skipped;
    pending = IterationRecord{};
    if (auto at = session.commit(std::move(rec), u, p, &grad)) return session.finish_at_trend(*at, p);
    if (pg.lpNorm<Eigen::Infinity>() <= cfg.grad_tol) return session.finish(u, F, SolveStatus::Converged, p);
    if (p >= cfg.max_iters) return session.finish(u, F, SolveStatus::MaxIterations, p);

    // Variables held at a bound by the gradient are frozen for this step.
    Eigen::VectorXd free = Eigen::VectorXd::Ones(n);
    for (Eigen::Index q = 0; q < n; ++q) {
      const auto k = static_cast<std::size_t>(q);
      if ((u[q] <= box.lower[k] && G[q] > 0.0) || (u[q] >= box.upper[k] && G[q] < 0.0)) free[q] = 0.0;
    }
    const Eigen::MatrixXd Z = free.asDiagonal();
    Eigen::VectorXd d = -(Z * H * Z) * G;
    if (!(G.dot(d) < 0.0)) {
      H.setIdentity();
      first_update = true;
      d = -(Z * G);
    }

    auto trial = [&](double a) { return projected_step(u + a * d, box); };
    auto sufficient = [&](const Eigen::VectorXd& x, double v) {
      return v <= F + cfg.wolfe.c1 * G.dot(x - u);
    };
    double alpha = 1.0;
    Eigen::VectorXd x = trial(alpha);
    double fx = session.objective(x, p);
    int evals = 1;
    if (sufficient(x, fx)) {
      // Extrapolate while the projected path keeps decreasing.
      for (int k = 0; k < 30; ++k) {
        const Eigen::VectorXd x2 = trial(2.0 * alpha);
        if ((x2 - x).norm() == 0.0) break;
        const double f2 = session.objective(x2, p);
        ++evals;
        if (!(f2 < fx && sufficient(x2, f2))) break;
        alpha *= 2.0;
        x = x2;
        fx = f2;
      }
    } else {
      bool ok = false;
      for (int k = 0; k < 50 && !ok; ++k) {
        alpha *= 0.5;
        x = trial(alpha);
        fx = session.objective(x, p);
        ++evals;
        ok = sufficient(x, fx);
      }
      if (!ok) return session.finish(u, F, SolveStatus::LineSearchFailed, p);
    }
    pending.line_search_evaluations = evals;
    pending.step_length = alpha;

    const Eigen::VectorXd s = x - u;
    if (s.norm() < 1e-15) return session.finish(u, F, SolveStatus::NoProgress, p);
    const Eigen::VectorXd y = session.gradient(x, p + 1).value - G;
    if (bfgs_update(H, s, y, first_update)) {
      first_update = false;
    } else {
      pending.update_skipped = true;
    }
    u = x;
  }
}

SolveResult solve(const Problem& problem, const Eigen::VectorXd& u0, const SolverConfig& cfg) {
  switch (cfg.engine) {
    case Engine::Newton: return newton_solve(problem, u0, cfg);
    case Engine::BFGS: return bfgs_solve(problem, u0, cfg);
    case Engine::ProjectedBFGS: return projected_bfgs_solve(problem, u0, cfg);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown engine");
}

SolveResult dtom_surrogate_solve(const Problem& problem, const Eigen::VectorXd& u0,
                                 QuadSpec fixed_quadrature, SolverConfig cfg) {
  if (fixed_quadrature.method == QuadMethod::Adaptive) {
    throw Error(ErrorCode::InvalidArgument, "a fixed surrogate needs a non-adaptive rule");
  }
  fixed_quadrature.fresh_samples = false;
  cfg.quad = fixed_quadrature;
  cfg.gradient_quad.reset();
  cfg.hessian_quad.reset();
  cfg.gradient_components.clear();
  cfg.hessian_components.clear();
  cfg.schedule = nullptr;
  cfg.scheme.mode = DerivativeMode::QuadThenDiff;
  cfg.scheme.central = true;
  cfg.engine = problem.u_box ? Engine::ProjectedBFGS : Engine::BFGS;
  return solve(problem, u0, cfg);
}

}  // namespace adasgo
