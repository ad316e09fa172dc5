#include <doctest.h>

#include <cmath>
#include <random>

#include "ruptura/error.hpp"
#include "ruptura/parallel.hpp"
#include "ruptura/placebo.hpp"

using namespace ruptura;

namespace {

Panel white_noise(int regions, int weeks, double sigma, std::uint64_t seed) {
  Panel p;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  for (int r = 0; r < regions; ++r) {
    auto& s = p.regions["r" + std::to_string(1000 + r)];
    for (int w = 0; w < weeks; ++w) s.push_back({w, n(rng), 500});
  }
  return p;
}

}  // namespace

TEST_CASE("eligible weeks leave a full window inside the span") {
  std::vector<Observation> s;
  for (int w = 0; w <= 100; ++w) s.push_back({w, 0.0, 300});
  const auto [lo, hi] = eligible_week_range(s, 9);
  CHECK(lo == 9);
  CHECK(hi == 91);
}

TEST_CASE("randomize_events samples inside the eligible range") {
  Panel p;
  for (int w = 0; w <= 100; ++w) p.regions["a"].push_back({w, 0.0, 300});
  const auto draw = randomize_events(p, 200, WindowConfig{}, 7);
  REQUIRE(draw.events.size() == 200);
  int lo = 1000, hi = -1000;
  for (const auto& e : draw.events) {
    CHECK(e.region_id == "a");
    lo = std::min(lo, e.event_week);
    hi = std::max(hi, e.event_week);
  }
  CHECK(lo >= 9);
  CHECK(hi <= 91);
  // 200 uniform draws over 83 weeks reach close to both ends.
  CHECK(lo <= 12);
  CHECK(hi >= 88);
}

TEST_CASE("randomize_events is deterministic by seed") {
  const Panel p = white_noise(5, 60, 1.0, 1);
  const auto a = randomize_events(p, 3, WindowConfig{}, 99);
  const auto b = randomize_events(p, 3, WindowConfig{}, 99);
  const auto c = randomize_events(p, 3, WindowConfig{}, 100);
  CHECK(a.events == b.events);
  CHECK(a.events != c.events);
}

TEST_CASE("short regions are skipped") {
  Panel p;
  for (int w = 0; w < 10; ++w) p.regions["short"].push_back({w, 0.0, 300});
  for (int w = 0; w < 40; ++w) p.regions["long"].push_back({w, 0.0, 300});
  const auto draw = randomize_events(p, 1, WindowConfig{}, 3);
  CHECK(draw.skipped == std::vector<RegionId>{"short"});
  REQUIRE(draw.events.size() == 1);
  CHECK(draw.events[0].region_id == "long");
}

TEST_CASE("randomize_events needs at least one draw per region") {
  CHECK_THROWS_AS(randomize_events(white_noise(1, 40, 1, 1), 0, WindowConfig{}, 1), Error);
}

TEST_CASE("placebo on white noise is centred on zero") {
  const Panel p = white_noise(50, 104, 1.0, 2024);
  const auto s = placebo_run(p, 5000, WindowConfig{}, 11);
  CHECK(s.n_episodes == 5000);
  CHECK(std::abs(s.mean_delta0) <= 0.05);
  CHECK(std::abs(s.mean_delta1) <= 0.02);
  CHECK(std::abs(s.mean_delta0) <= 3 * s.std_delta0 / std::sqrt(5000.0));
  CHECK(std::abs(s.mean_delta1) <= 3 * s.std_delta1 / std::sqrt(5000.0));
  CHECK(s.std_delta0 > 0);
  CHECK(s.seed == 11);
}

TEST_CASE("placebo on a flat panel is exactly zero") {
  Panel p;
  for (int r = 0; r < 3; ++r)
    for (int w = 0; w < 50; ++w) p.regions["r" + std::to_string(r)].push_back({w, 2.5, 300});
  const auto s = placebo_run(p, 200, WindowConfig{}, 4);
  CHECK(s.n_episodes == 200);
  CHECK(s.mean_delta0 == 0.0);
  CHECK(s.std_delta0 == 0.0);
  CHECK(s.mean_delta1 == 0.0);
  CHECK(s.std_delta1 == 0.0);
}

TEST_CASE("placebo spread shrinks as the window widens") {
  const Panel p = white_noise(40, 120, 1.0, 77);
  double prev0 = 1e9, prev1 = 1e9;
  for (int T : {5, 9, 15}) {
    const auto s = placebo_run(p, 2000, WindowConfig{T, 1, 3}, 5);
    CHECK(s.std_delta0 < prev0);
    CHECK(s.std_delta1 < prev1);
    prev0 = s.std_delta0;
    prev1 = s.std_delta1;
  }
}

TEST_CASE("placebo without estimable episodes is an error") {
  Panel p;
  for (int w = 0; w < 10; ++w) p.regions["a"].push_back({w, 0.0, 300});
  CHECK_THROWS_AS(placebo_run(p, 10, WindowConfig{}, 1), Error);
}

TEST_CASE("placebo results do not depend on the thread count") {
  const Panel p = white_noise(20, 80, 1.0, 8);
  set_thread_count(1);
  const auto a = placebo_run(p, 1500, WindowConfig{}, 21);
  set_thread_count(4);
  const auto b = placebo_run(p, 1500, WindowConfig{}, 21);
  set_thread_count(0);
  CHECK(a.mean_delta0 == b.mean_delta0);
  CHECK(a.std_delta1 == b.std_delta1);
  CHECK(a.attempts == b.attempts);
}

TEST_CASE("missing weeks make some draws fail and the run draws again") {
  Panel p = white_noise(10, 80, 1.0, 9);
  for (auto& [id, s] : p.regions) {
    std::vector<Observation> kept;
    for (const auto& o : s)
      if (o.week % 3 != 0) kept.push_back(o);
    s = kept;
  }
  const auto s = placebo_run(p, 300, WindowConfig{9, 1, 5}, 2);
  CHECK(s.n_episodes == 300);
  CHECK(s.attempts >= 300);
}
