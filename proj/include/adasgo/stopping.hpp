#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace adasgo {

/// Per-component constants of the gradient error model
///   E1_q = K1_q h,   E2_q = K2_q 2^{-l r} + K3_q * terms_q
/// where terms_q is sum_{i in L\I} 2^{-|i| r} (or a rho-form bound) for the
/// downset used by component q.
struct ErrorModel {
  std::vector<double> K1, K2, K3;
  double h = 0.0;
  int r = 2;
  int level = 1;
  std::vector<double> downset_terms;
};

/// ||E1|| + ||E2|| (Euclidean norms over components).
double assemble_error_estimate(const ErrorModel& model);

struct BreakdownInputs {
  double grad_norm = 0.0;
  double kappa = 1.0;
  std::optional<double> error_estimate;
  std::optional<ErrorModel> model;
};

/// True iff estimate > ||G|| / (1 + kappa). Throws MissingEstimate when
/// neither an estimate nor a model is supplied.
bool breakdown_check(const BreakdownInputs& in);

/// Tracks high-accuracy objective probes F_eps'(u_p) over iterations.
class TrendMonitor {
 public:
  struct Decision {
    bool stop = false;
    /// Index of the smallest probe so far.
    std::size_t at_iteration = 0;
  };

  explicit TrendMonitor(int patience = 1);

  /// Appends a probe; stops once `patience` consecutive probes fail to
  /// improve on their predecessor.
  Decision push(double value);

  const std::vector<double>& history() const { return history_; }
  std::size_t best_index() const;

 private:
  int patience_;
  int streak_ = 0;
  std::vector<double> history_;
};

TrendMonitor::Decision trend_stop(TrendMonitor& monitor, double new_value);

/// Replays a complete probe history; returns the first Stop decision, or
/// {false, argmin} when the monitor never fires.
TrendMonitor::Decision first_trend_stop(std::span<const double> history, int patience = 1);

struct QuadraticFit {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  /// Root-mean-square misfit.
  double residual = 0.0;
};

/// Least-squares y ~ a x^2 + b x + c. Throws DegenerateFit when fewer than
/// three points are given or all x coincide.
QuadraticFit quadratic_fit(std::span<const double> x, std::span<const double> y);

/// ||A^{-1} H_fine - I||_2: how far the working Hessian is from a finer one.
double tau_proxy(const Eigen::MatrixXd& A, const Eigen::MatrixXd& H_fine);

}  // namespace adasgo
