#include "adasgo/stopping.hpp"

#include <algorithm>
#include <cmath>

#include "adasgo/errors.hpp"

namespace adasgo {

double assemble_error_estimate(const ErrorModel& m) {
  const std::size_t n = std::max({m.K1.size(), m.K2.size(), m.K3.size()});
  auto at = [](const std::vector<double>& v, std::size_t q) { return q < v.size() ? v[q] : 0.0; };
  const double level_term = std::exp2(-static_cast<double>(m.level) * m.r);
  double e1 = 0.0, e2 = 0.0;
  for (std::size_t q = 0; q < n; ++q) {
    const double a = at(m.K1, q) * m.h;
    const double b = at(m.K2, q) * level_term + at(m.K3, q) * at(m.downset_terms, q);
    e1 += a * a;
    e2 += b * b;
  }
  return std::sqrt(e1) + std::sqrt(e2);
}

bool breakdown_check(const BreakdownInputs& in) {
  double estimate = 0.0;
  if (in.error_estimate) {
    estimate = *in.error_estimate;
  } else if (in.model) {
    estimate = assemble_error_estimate(*in.model);
  } else {
    throw Error(ErrorCode::MissingEstimate, "breakdown check needs an error estimate or constants");
  }
  return estimate > in.grad_norm / (1.0 + in.kappa);
}

TrendMonitor::TrendMonitor(int patience) : patience_(std::max(patience, 1)) {}

TrendMonitor::Decision TrendMonitor::push(double value) {
  if (!std::isfinite(value)) throw Error(ErrorCode::NonFiniteValue, "trend probe is not finite");
  if (!history_.empty() && value >= history_.back()) {
    ++streak_;
  } else {
    streak_ = 0;
  }
  history_.push_back(value);
  return {streak_ >= patience_, best_index()};
}

std::size_t TrendMonitor::best_index() const {
  return static_cast<std::size_t>(std::min_element(history_.begin(), history_.end()) -
                                  history_.begin());
}

TrendMonitor::Decision trend_stop(TrendMonitor& monitor, double new_value) {
  return monitor.push(new_value);
}

TrendMonitor::Decision first_trend_stop(std::span<const double> history, int patience) {
  TrendMonitor m(patience);
  TrendMonitor::Decision d;
  for (double v : history) {
    d = m.push(v);
    if (d.stop) return d;
  }
  return d;
}

QuadraticFit quadratic_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::DimensionMismatch, "x and y differ in length");
  if (x.size() < 3) throw Error(ErrorCode::DegenerateFit, "quadratic fit needs three points");
  if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) {
    throw Error(ErrorCode::DegenerateFit, "all abscissae coincide");
  }
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd V(n, 3);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double xj = x[static_cast<std::size_t>(j)];
    V(j, 0) = xj * xj;
    V(j, 1) = xj;
    V(j, 2) = 1.0;
    rhs[j] = y[static_cast<std::size_t>(j)];
  }
  const Eigen::VectorXd coef = V.colPivHouseholderQr().solve(rhs);
  QuadraticFit fit{coef[0], coef[1], coef[2], 0.0};
  fit.residual = std::sqrt((V * coef - rhs).squaredNorm() / static_cast<double>(n));
  return fit;
}

double tau_proxy(const Eigen::MatrixXd& A, const Eigen::MatrixXd& H_fine) {
  const Eigen::MatrixXd D =
      A.fullPivLu().solve(H_fine) - Eigen::MatrixXd::Identity(A.rows(), A.cols());
  return Eigen::JacobiSVD<Eigen::MatrixXd>(D).singularValues()(0);
}

}  // namespace adasgo
