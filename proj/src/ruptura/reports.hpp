#pragma once

#include <json.hpp>

#include "ruptura/did_match.hpp"
#include "ruptura/evaluator.hpp"
#include "ruptura/placebo.hpp"
#include "ruptura/rdd_estimator.hpp"

namespace ruptura {

// JSON shapes written by the command-line tools. Non-finite numbers and
// absent correlations serialize as null.

nlohmann::json to_json(const SummaryStat& s);
nlohmann::json to_json(const CohortStats& s);
nlohmann::json to_json(const BatchResult& r);
nlohmann::json to_json(const PlaceboSummary& s);
nlohmann::json to_json(const EvalReport& r);
nlohmann::json to_json(const DiDResult& r);
nlohmann::json to_json(const WindowConfig& w);

}  // namespace ruptura
