#pragma once

#include <span>
#include <utility>
#include <vector>

#include "ruptura/rdd_estimator.hpp"

namespace ruptura {

// y_t = intercept + sum_i coefficients[i] * y_{t-1-i}, fitted by conditional
// least squares.
struct ArFit {
  int order = 0;
  double intercept = 0.0;
  std::vector<double> coefficients;
  double rss = 0.0;
  double aic = 0.0;
};

// Fits on the equations t = start .. n-1 (start >= order) so that fits of
// different order can share one effective sample.
ArFit fit_ar(std::span<const double> y, int order, int start);

// True when every root of the AR polynomial lies outside the unit circle.
bool is_stationary(const ArFit& fit);

// Chooses p in [0, max_order] by AIC on a common effective sample. Orders
// the series cannot support and non-stationary fits are skipped; ties keep
// the smaller order. Order 0 is always admissible.
ArFit select_ar(std::span<const double> y, int max_order);

std::vector<double> ar_forecast(const ArFit& fit, std::span<const double> history, int steps);

// Forecast the after segment from the before history, fit a line to the
// forecasts and return (delta0, delta1) relative to `before_fit`.
std::pair<double, double> forecast_deltas(std::span<const Point> history, const LineFit& before_fit,
                                          const WindowConfig& window, int max_order);

}  // namespace ruptura
