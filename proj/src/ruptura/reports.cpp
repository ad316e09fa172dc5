#include "ruptura/reports.hpp"

#include <cmath>

namespace ruptura {

using nlohmann::json;

namespace {
json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
json optional_number(const std::optional<double>& v) { return v ? number(*v) : json(nullptr); }

json target_json(const TargetMetrics& m) { return {{"mse", number(m.mse)}, {"pearson_r", optional_number(m.pearson_r)}}; }

const char* kTargetNames[] = {"delta0", "delta1"};
}  // namespace

json to_json(const SummaryStat& s) {
  return {{"n", s.n}, {"mean", number(s.mean)}, {"std", number(s.std)}, {"median", number(s.median)}};
}

json to_json(const CohortStats& s) {
  return {{"delta0", to_json(s.delta0)},
          {"delta1", to_json(s.delta1)},
          {"y_at_event", to_json(s.y_at_event)},
          {"y_after_event", to_json(s.y_after_event)},
          {"beta0_before", to_json(s.beta0_before)},
          {"beta1_before", to_json(s.beta1_before)}};
}

json to_json(const BatchResult& r) {
  json skipped = json::array();
  for (const auto& s : r.skipped) skipped.push_back({{"region_id", s.region_id}, {"reason", s.reason}});
  return {{"n_outcomes", r.outcomes.size()}, {"stats", to_json(r.stats)}, {"skipped", skipped}};
}

json to_json(const PlaceboSummary& s) {
  return {{"n_episodes", s.n_episodes},   {"mean_delta0", number(s.mean_delta0)},
          {"std_delta0", number(s.std_delta0)}, {"mean_delta1", number(s.mean_delta1)},
          {"std_delta1", number(s.std_delta1)}, {"seed", s.seed},
          {"attempts", s.attempts}};
}

json to_json(const EvalReport& r) {
  json j;
  j["n_test"] = r.n_test;
  for (int t = 0; t < 2; ++t) j["targets"][kTargetNames[t]] = target_json(r.targets[static_cast<std::size_t>(t)]);
  if (r.vs_baseline) {
    json b;
    b["baseline_name"] = r.vs_baseline->baseline_name;
    for (int t = 0; t < 2; ++t) {
      const auto& test = r.vs_baseline->tests[static_cast<std::size_t>(t)];
      b["targets"][kTargetNames[t]] = {{"baseline", target_json(r.vs_baseline->baseline_metrics[static_cast<std::size_t>(t)])},
                                       {"t_statistic", number(test.t_statistic)},
                                       {"t_statistic_sign", test.t_statistic > 0 ? 1 : test.t_statistic < 0 ? -1 : 0},
                                       {"p_value", number(test.p_value)},
                                       {"df", test.df}};
    }
    j["vs_baseline"] = b;
  }
  if (!r.regions.empty()) j["regions"] = r.regions;
  if (!r.strata.empty()) {
    for (const auto& [name, sub] : r.strata) j["strata"][name] = to_json(sub);
  }
  return j;
}

json to_json(const DiDResult& r) {
  return {{"target_region", r.target_region},
          {"matched_regions", r.matched_regions},
          {"target_pre", number(r.target_pre)},
          {"observed", number(r.observed)},
          {"matched_pre", number(r.matched_pre)},
          {"matched_post", number(r.matched_post)},
          {"counterfactual", number(r.counterfactual)},
          {"did", number(r.did)}};
}

json to_json(const WindowConfig& w) {
  return {{"half_width", w.half_width}, {"buffer", w.buffer}, {"min_points_per_segment", w.min_points_per_segment}};
}

}  // namespace ruptura
