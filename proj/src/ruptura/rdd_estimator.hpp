#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ruptura/panel_store.hpp"

namespace ruptura {

// Half-width T, event buffer b and the minimum number of observed points
// required in each fitted segment.
struct WindowConfig {
  int half_width = 9;
  int buffer = 1;
  int min_points_per_segment = 3;

  bool operator==(const WindowConfig&) const = default;
  void validate() const;

  // Offset ranges [lo, hi] of the two fitted segments. With b = 0 the event
  // week belongs to the after segment.
  int before_lo() const { return -half_width; }
  int before_hi() const { return buffer >= 1 ? -buffer : -1; }
  int after_lo() const { return buffer; }
  int after_hi() const { return half_width; }
  int before_length() const { return before_hi() - before_lo() + 1; }
};

struct Point {
  int t = 0;
  double y = 0.0;
};

struct EpisodeWindow {
  RegionId region_id;
  int event_week = 0;
  WindowConfig config;
  std::vector<Point> before;
  std::vector<Point> after;
  std::optional<double> y_at_event;
  std::optional<double> y_after_event;

  // True when every offset of the before range is observed.
  bool before_complete() const {
    return static_cast<int>(before.size()) == config.before_length();
  }
};

// Line y = beta0 + beta1 * t with t in event-offset coordinates, so beta0 is
// the value extrapolated to the event week.
struct LineFit {
  double beta0 = 0.0;
  double beta1 = 0.0;
  int n = 0;
};

struct DiscontinuityOutcome {
  RegionId region_id;
  std::string event_type;
  LineFit before_fit;
  LineFit after_fit;
  double delta0 = 0.0;
  double delta1 = 0.0;
  std::optional<double> y_at_event;
  std::optional<double> y_after_event;
};

EpisodeWindow extract_window(const Panel& panel, const RegionId& region_id, int event_week,
                             const WindowConfig& config);
EpisodeWindow extract_window(std::span<const Observation> series, const RegionId& region_id,
                             int event_week, const WindowConfig& config);

LineFit fit_segment(std::span<const Point> points);

DiscontinuityOutcome estimate_discontinuity(const EpisodeWindow& window,
                                            const std::string& event_type = {});

struct SummaryStat {
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1)
  double median = 0.0;
};

SummaryStat summarize(std::vector<double> values);

struct CohortStats {
  SummaryStat delta0;
  SummaryStat delta1;
  SummaryStat y_at_event;
  SummaryStat y_after_event;
  SummaryStat beta0_before;
  SummaryStat beta1_before;
};

struct SkippedEpisode {
  RegionId region_id;
  std::string reason;
};

struct BatchResult {
  std::vector<DiscontinuityOutcome> outcomes;  // sorted by region_id
  std::vector<EpisodeWindow> windows;          // parallel to outcomes
  std::vector<SkippedEpisode> skipped;
  CohortStats stats;
};

CohortStats cohort_stats(std::span<const DiscontinuityOutcome> outcomes);

BatchResult batch_estimate(const Panel& panel, const EventTable& events,
                           const std::string& event_type, const WindowConfig& config);

std::string outcomes_to_csv(std::span<const DiscontinuityOutcome> outcomes);

}  // namespace ruptura
