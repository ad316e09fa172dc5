#include "ruptura/placebo.hpp"

#include <cmath>
#include <optional>

#include "ruptura/error.hpp"
#include "ruptura/parallel.hpp"

namespace ruptura {

namespace {
constexpr std::size_t kAttemptsPerEpisode = 20;
constexpr std::size_t kBatch = 1024;
}  // namespace

std::pair<int, int> eligible_week_range(std::span<const Observation> series, int half_width) {
  if (series.empty()) return {1, 0};
  return {series.front().week + half_width, series.back().week - half_width};
}

PlaceboDraw randomize_events(const Panel& panel, int n_per_region, const WindowConfig& config,
                             std::uint64_t seed) {
  if (n_per_region < 1) throw Error(ErrorCode::InvalidArgument, "n_per_region must be >= 1");
  config.validate();
  PlaceboDraw draw;
  std::uint64_t region_index = 0;
  for (const auto& [id, series] : panel.regions) {
    const auto [lo, hi] = eligible_week_range(series, config.half_width);
    if (lo > hi) {
      draw.skipped.push_back(id);
      ++region_index;
      continue;
    }
    auto rng = substream(seed, region_index++);
    const auto span = static_cast<std::size_t>(hi - lo + 1);
    for (int k = 0; k < n_per_region; ++k)
      draw.events.push_back({id, lo + static_cast<int>(uniform_index(rng, span))});
  }
  return draw;
}

PlaceboSummary placebo_run(const Panel& panel, std::size_t n_total_episodes,
                           const WindowConfig& config, std::uint64_t seed) {
  if (n_total_episodes < 1) throw Error(ErrorCode::InvalidArgument, "episodes must be >= 1");
  config.validate();

  struct Eligible {
    const RegionId* id;
    const std::vector<Observation>* series;
    int lo, hi;
  };
  std::vector<Eligible> eligible;
  for (const auto& [id, series] : panel.regions) {
    const auto [lo, hi] = eligible_week_range(series, config.half_width);
    if (lo <= hi) eligible.push_back({&id, &series, lo, hi});
  }
  if (eligible.empty())
    throw Error(ErrorCode::InsufficientData, "placebo: no region has an eligible event week");

  std::vector<double> d0, d1;
  const std::size_t max_attempts = n_total_episodes * kAttemptsPerEpisode;
  std::size_t attempt = 0;
  while (d0.size() < n_total_episodes && attempt < max_attempts) {
    const std::size_t batch = std::min(kBatch, max_attempts - attempt);
    std::vector<std::optional<std::pair<double, double>>> results(batch);
    parallel_for(batch, [&](std::size_t j) {
      auto rng = substream(seed, attempt + j);
      const auto& e = eligible[uniform_index(rng, eligible.size())];
      const int week = e.lo + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(e.hi - e.lo + 1)));
      try {
        auto window = extract_window(std::span<const Observation>(*e.series), *e.id, week, config);
        auto outcome = estimate_discontinuity(window);
        results[j] = std::make_pair(outcome.delta0, outcome.delta1);
      } catch (const Error&) {
      }
    });
    for (std::size_t j = 0; j < batch && d0.size() < n_total_episodes; ++j) {
      ++attempt;
      if (results[j]) {
        d0.push_back(results[j]->first);
        d1.push_back(results[j]->second);
      }
    }
  }
  if (d0.empty()) throw Error(ErrorCode::InsufficientData, "placebo: no estimable episodes");
  if (d0.size() < n_total_episodes)
    log_warning("placebo: eligibility exhausted after " + std::to_string(d0.size()) + " episodes");

  const auto s0 = summarize(d0);
  const auto s1 = summarize(d1);
  PlaceboSummary summary;
  summary.n_episodes = d0.size();
  summary.mean_delta0 = s0.mean;
  summary.std_delta0 = s0.std;
  summary.mean_delta1 = s1.mean;
  summary.std_delta1 = s1.std;
  summary.seed = seed;
  summary.attempts = attempt;
  return summary;
}

}  // namespace ruptura
