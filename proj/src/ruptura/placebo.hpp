#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ruptura/panel_store.hpp"
#include "ruptura/rdd_estimator.hpp"

namespace ruptura {

struct PlaceboEvent {
  RegionId region_id;
  int event_week = 0;

  bool operator==(const PlaceboEvent&) const = default;
};

struct PlaceboDraw {
  std::vector<PlaceboEvent> events;  // grouped by region, in region order
  std::vector<RegionId> skipped;     // regions without an eligible week
};

// Weeks w with [w - T, w + T] inside the region's observed span.
std::pair<int, int> eligible_week_range(std::span<const Observation> series, int half_width);

PlaceboDraw randomize_events(const Panel& panel, int n_per_region, const WindowConfig& config,
                             std::uint64_t seed);

struct PlaceboSummary {
  std::size_t n_episodes = 0;
  double mean_delta0 = 0.0;
  double std_delta0 = 0.0;
  double mean_delta1 = 0.0;
  double std_delta1 = 0.0;
  std::uint64_t seed = 0;
  std::size_t attempts = 0;  // draws consumed, including ones lacking data
};

// Draws episodes with replacement across eligible regions until
// n_total_episodes estimate successfully or the attempt budget runs out.
PlaceboSummary placebo_run(const Panel& panel, std::size_t n_total_episodes,
                           const WindowConfig& config, std::uint64_t seed);

}  // namespace ruptura
