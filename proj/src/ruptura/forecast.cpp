#include "ruptura/forecast.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "ruptura/error.hpp"

namespace ruptura {

ArFit fit_ar(std::span<const double> y, int order, int start) {
  const int n = static_cast<int>(y.size());
  if (order < 0 || start < order) throw Error(ErrorCode::InvalidArgument, "bad AR order/start");
  const int m = n - start;
  if (m < order + 1) throw Error(ErrorCode::InsufficientData, "series too short for AR order");
  Eigen::MatrixXd A(m, order + 1);
  Eigen::VectorXd b(m);
  for (int r = 0; r < m; ++r) {
    const int t = start + r;
    A(r, 0) = 1.0;
    for (int i = 0; i < order; ++i) A(r, i + 1) = y[static_cast<std::size_t>(t - 1 - i)];
    b(r) = y[static_cast<std::size_t>(t)];
  }
  const Eigen::VectorXd coef = A.completeOrthogonalDecomposition().solve(b);
  ArFit fit;
  fit.order = order;
  fit.intercept = coef(0);
  for (int i = 0; i < order; ++i) fit.coefficients.push_back(coef(i + 1));
  fit.rss = (A * coef - b).squaredNorm();
  const double mm = static_cast<double>(m);
  const double k = static_cast<double>(order + 1);
  fit.aic = fit.rss > 1e-300 ? mm * std::log(fit.rss / mm) + 2.0 * k
                             : -std::numeric_limits<double>::infinity();
  return fit;
}

bool is_stationary(const ArFit& fit) {
  const int p = fit.order;
  if (p == 0) return true;
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(p, p);
  for (int i = 0; i < p; ++i) companion(0, i) = fit.coefficients[static_cast<std::size_t>(i)];
  for (int i = 1; i < p; ++i) companion(i, i - 1) = 1.0;
  return companion.eigenvalues().cwiseAbs().maxCoeff() < 1.0;
}

ArFit select_ar(std::span<const double> y, int max_order) {
  const int n = static_cast<int>(y.size());
  if (n < 2) throw Error(ErrorCode::InsufficientData, "AR selection needs at least 2 points");
  // largest order leaving more equations than parameters on the shared sample
  int usable = 0;
  for (int p = 0; p <= max_order; ++p)
    if (n - p >= p + 2) usable = p;
  ArFit best;
  bool have = false;
  for (int p = 0; p <= usable; ++p) {
    ArFit fit = fit_ar(y, p, usable);
    if (!is_stationary(fit)) continue;
    if (!have || fit.aic < best.aic) {
      best = std::move(fit);
      have = true;
    }
  }
  return best;
}

std::vector<double> ar_forecast(const ArFit& fit, std::span<const double> history, int steps) {
  std::vector<double> series(history.begin(), history.end());
  if (static_cast<int>(series.size()) < fit.order)
    throw Error(ErrorCode::InsufficientData, "history shorter than AR order");
  std::vector<double> out;
  for (int s = 0; s < steps; ++s) {
    double next = fit.intercept;
    for (int i = 0; i < fit.order; ++i)
      next += fit.coefficients[static_cast<std::size_t>(i)] * series[series.size() - 1 - static_cast<std::size_t>(i)];
    series.push_back(next);
    out.push_back(next);
  }
  return out;
}

std::pair<double, double> forecast_deltas(std::span<const Point> history, const LineFit& before_fit,
                                          const WindowConfig& window, int max_order) {
  if (history.empty()) throw Error(ErrorCode::InsufficientData, "empty history");
  std::vector<double> values;
  for (const auto& p : history) values.push_back(p.y);
  const ArFit fit = select_ar(values, max_order);
  const int last = history.back().t;
  const int steps = window.after_hi() - last;
  const auto path = ar_forecast(fit, values, steps);
  std::vector<Point> future;
  for (int s = 0; s < steps; ++s) {
    const int t = last + 1 + s;
    if (t >= window.after_lo() && t <= window.after_hi()) future.push_back({t, path[static_cast<std::size_t>(s)]});
  }
  const LineFit after = fit_segment(future);
  return {after.beta0 - before_fit.beta0, after.beta1 - before_fit.beta1};
}

}  // namespace ruptura
