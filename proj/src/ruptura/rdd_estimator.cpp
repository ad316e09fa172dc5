#include "ruptura/rdd_estimator.hpp"

#include <algorithm>
#include <cmath>

#include "ruptura/csv.hpp"
#include "ruptura/error.hpp"
#include "ruptura/parallel.hpp"

namespace ruptura {

void WindowConfig::validate() const {
  if (half_width < 1) throw Error(ErrorCode::Config, "window half-width T must be >= 1");
  if (buffer < 0) throw Error(ErrorCode::Config, "buffer must be >= 0");
  if (half_width <= buffer) throw Error(ErrorCode::Config, "window half-width T must exceed buffer");
  if (min_points_per_segment < 2)
    throw Error(ErrorCode::Config, "min_points_per_segment must be >= 2");
}

EpisodeWindow extract_window(std::span<const Observation> series, const RegionId& region_id,
                             int event_week, const WindowConfig& config) {
  config.validate();
  EpisodeWindow w;
  w.region_id = region_id;
  w.event_week = event_week;
  w.config = config;
  for (const auto& obs : series) {
    const int t = obs.week - event_week;
    if (t == 0) w.y_at_event = obs.score;
    if (t == 1) w.y_after_event = obs.score;
    if (t >= config.before_lo() && t <= config.before_hi()) {
      w.before.push_back({t, obs.score});
    } else if (t >= config.after_lo() && t <= config.after_hi()) {
      w.after.push_back({t, obs.score});
    }
  }
  const auto need = static_cast<std::size_t>(config.min_points_per_segment);
  if (w.before.size() < need)
    throw InsufficientDataError(Segment::Before,
                                "region " + region_id + ": before segment has " +
                                    std::to_string(w.before.size()) + " points, need " +
                                    std::to_string(need));
  if (w.after.size() < need)
    throw InsufficientDataError(Segment::After,
                                "region " + region_id + ": after segment has " +
                                    std::to_string(w.after.size()) + " points, need " +
                                    std::to_string(need));
  return w;
}

EpisodeWindow extract_window(const Panel& panel, const RegionId& region_id, int event_week,
                             const WindowConfig& config) {
  const auto* series = panel.find(region_id);
  if (!series) throw Error(ErrorCode::InvalidArgument, "region " + region_id + " not in panel");
  return extract_window(std::span<const Observation>(*series), region_id, event_week, config);
}

LineFit fit_segment(std::span<const Point> points) {
  if (points.size() < 2) throw Error(ErrorCode::Degenerate, "line fit needs at least 2 points");
  const double n = static_cast<double>(points.size());
  double t_mean = 0.0, y_mean = 0.0;
  for (const auto& p : points) {
    t_mean += p.t;
    y_mean += p.y;
  }
  t_mean /= n;
  y_mean /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : points) {
    const double dt = p.t - t_mean;
    sxx += dt * dt;
    sxy += dt * (p.y - y_mean);
  }
  if (!(sxx > 0.0)) throw Error(ErrorCode::Degenerate, "line fit needs two distinct offsets");
  LineFit fit;
  fit.beta1 = sxy / sxx;
  fit.beta0 = y_mean - fit.beta1 * t_mean;
  fit.n = static_cast<int>(points.size());
  return fit;
}

DiscontinuityOutcome estimate_discontinuity(const EpisodeWindow& window,
                                            const std::string& event_type) {
  DiscontinuityOutcome out;
  out.region_id = window.region_id;
  out.event_type = event_type;
  out.before_fit = fit_segment(window.before);
  out.after_fit = fit_segment(window.after);
  out.delta0 = out.after_fit.beta0 - out.before_fit.beta0;
  out.delta1 = out.after_fit.beta1 - out.before_fit.beta1;
  out.y_at_event = window.y_at_event;
  out.y_after_event = window.y_after_event;
  return out;
}

SummaryStat summarize(std::vector<double> values) {
  SummaryStat s;
  s.n = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  std::sort(values.begin(), values.end());
  const std::size_t mid = s.n / 2;
  s.median = s.n % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
  return s;
}

CohortStats cohort_stats(std::span<const DiscontinuityOutcome> outcomes) {
  std::vector<double> d0, d1, y0, y1, b0, b1;
  for (const auto& o : outcomes) {
    d0.push_back(o.delta0);
    d1.push_back(o.delta1);
    if (o.y_at_event) y0.push_back(*o.y_at_event);
    if (o.y_after_event) y1.push_back(*o.y_after_event);
    b0.push_back(o.before_fit.beta0);
    b1.push_back(o.before_fit.beta1);
  }
  return {summarize(d0), summarize(d1), summarize(y0), summarize(y1), summarize(b0), summarize(b1)};
}

BatchResult batch_estimate(const Panel& panel, const EventTable& events,
                           const std::string& event_type, const WindowConfig& config) {
  config.validate();
  const auto targets = events.of_type(event_type);
  std::vector<std::pair<RegionId, int>> jobs(targets.begin(), targets.end());

  struct Slot {
    std::optional<DiscontinuityOutcome> outcome;
    std::optional<EpisodeWindow> window;
    std::string reason;
  };
  std::vector<Slot> slots(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    const auto& [region, week] = jobs[i];
    const auto* series = panel.find(region);
    if (!series) {
      slots[i].reason = "region not in panel";
      return;
    }
    try {
      auto window = extract_window(std::span<const Observation>(*series), region, week, config);
      slots[i].outcome = estimate_discontinuity(window, event_type);
      slots[i].window = std::move(window);
    } catch (const Error& e) {
      slots[i].reason = e.what();
    }
  });

  BatchResult result;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (slots[i].outcome) {
      result.outcomes.push_back(std::move(*slots[i].outcome));
      result.windows.push_back(std::move(*slots[i].window));
    } else {
      result.skipped.push_back({jobs[i].first, slots[i].reason});
    }
  }
  result.stats = cohort_stats(result.outcomes);
  return result;
}

std::string outcomes_to_csv(std::span<const DiscontinuityOutcome> outcomes) {
  std::string out =
      "region_id,event_type,delta0,delta1,beta0_before,beta1_before,beta0_after,beta1_after,"
      "n_before,n_after\n";
  for (const auto& o : outcomes) {
    out += o.region_id + ',' + o.event_type + ',' + csv::format(o.delta0) + ',' +
           csv::format(o.delta1) + ',' + csv::format(o.before_fit.beta0) + ',' +
           csv::format(o.before_fit.beta1) + ',' + csv::format(o.after_fit.beta0) + ',' +
           csv::format(o.after_fit.beta1) + ',' + std::to_string(o.before_fit.n) + ',' +
           std::to_string(o.after_fit.n) + '\n';
  }
  return out;
}

}  // namespace ruptura
