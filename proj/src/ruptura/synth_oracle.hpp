#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ruptura/panel_store.hpp"

namespace ruptura {

enum class EffectKind {
  Zero,
  Constant,
  LinearInMeta,       // sociodemographic vector
  LinearInEmbedding,  // exogenous embedding
  LinearInHistory,    // (pre-event level, pre-event slope)
};

// delta0* = delta0 + weights0 . x, delta1* = delta1 + weights1 . x, where x is
// the vector selected by `kind` (empty for Zero/Constant).
struct EffectMap {
  EffectKind kind = EffectKind::Zero;
  double delta0 = 0.0;
  double delta1 = 0.0;
  std::vector<double> weights0;
  std::vector<double> weights1;
  // Omitted weights0 are drawn N(0, scale^2 / dim); omitted weights1 are zero.
  double weight_scale = 1.0;
};

struct SynthConfig {
  int n_regions = 100;
  int n_weeks = 104;
  double noise_sigma = 0.0;
  double ar_coefficient = 0.0;
  double seasonal_amplitude = 0.0;  // period 52
  int event_week_min = 40;
  int event_week_max = 60;
  EffectMap effect;
  double effect_noise_delta0 = 0.0;
  double effect_noise_delta1 = 0.0;
  double missing_rate = 0.0;
  std::uint64_t seed = 0;
  int half_width = 9;
  std::size_t sociodem_dim = 9;
  std::size_t embedding_dim = 16;
  double level_sd = 1.0;
  double slope_sd = 0.05;
  bool covariate = false;
  std::string event_type = "first_case";
  std::string score_name = "anxiety";
  std::int64_t min_users = 200;
  std::int64_t max_users = 2000;

  void validate() const;
  static SynthConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct RegionTruth {
  double delta0 = 0.0;
  double delta1 = 0.0;
  double beta0 = 0.0;  // pre-event level at the event week
  double beta1 = 0.0;  // pre-event slope per week
  int event_week = 0;
};

struct GroundTruth {
  std::map<RegionId, RegionTruth> regions;
  std::vector<double> weights0;
  std::vector<double> weights1;

  nlohmann::json to_json() const;
};

struct SynthData {
  Panel panel;
  std::optional<Panel> covariate;
  EventTable events;
  MetaTable meta;
  EmbeddingTable embeddings;
  GroundTruth truth;
};

SynthData generate(const SynthConfig& config);

// Writes panel.csv, events.csv, meta.csv, embeddings.csv, ground_truth.json
// and covariate.csv when present. Returns the written paths.
std::vector<std::string> write_synth(const SynthData& data, const std::string& out_dir);

}  // namespace ruptura
