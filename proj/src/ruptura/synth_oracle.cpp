#include "ruptura/synth_oracle.hpp"

#include <cmath>
#include <filesystem>

#include "ruptura/csv.hpp"
#include "ruptura/error.hpp"
#include "ruptura/parallel.hpp"

namespace ruptura {

using nlohmann::json;

namespace {

const char* kind_name(EffectKind k) {
  switch (k) {
    case EffectKind::Zero: return "zero";
    case EffectKind::Constant: return "constant";
    case EffectKind::LinearInMeta: return "linear_in_meta";
    case EffectKind::LinearInEmbedding: return "linear_in_embedding";
    case EffectKind::LinearInHistory: return "linear_in_history";
  }
  return "zero";
}

EffectKind parse_kind(const std::string& s) {
  for (auto k : {EffectKind::Zero, EffectKind::Constant, EffectKind::LinearInMeta,
                 EffectKind::LinearInEmbedding, EffectKind::LinearInHistory})
    if (s == kind_name(k)) return k;
  throw Error(ErrorCode::Config, "unknown effect_map kind '" + s + "'");
}

std::size_t effect_dim(const SynthConfig& c) {
  switch (c.effect.kind) {
    case EffectKind::LinearInMeta: return c.sociodem_dim;
    case EffectKind::LinearInEmbedding: return c.embedding_dim;
    case EffectKind::LinearInHistory: return 2;
    default: return 0;
  }
}

// Stream tags keep the per-region draws of each component independent.
enum Stream : std::uint64_t { kTrend = 1, kSeries, kMeta, kEmbedding, kCovariate, kWeights, kMissing };

std::mt19937_64 region_stream(std::uint64_t seed, std::size_t region, Stream s) {
  return substream(seed, static_cast<std::uint64_t>(region) * 16 + s);
}

double dot(const std::vector<double>& w, const std::vector<double>& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x[i];
  return s;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_regions < 1) throw Error(ErrorCode::Config, "n_regions must be >= 1");
  if (half_width < 1) throw Error(ErrorCode::Config, "half_width must be >= 1");
  if (!(noise_sigma >= 0.0)) throw Error(ErrorCode::Config, "noise_sigma must be >= 0");
  if (!(ar_coefficient > -1.0 && ar_coefficient < 1.0))
    throw Error(ErrorCode::Config, "ar_coefficient must lie in (-1, 1)");
  if (!(seasonal_amplitude >= 0.0)) throw Error(ErrorCode::Config, "seasonal_amplitude must be >= 0");
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) throw Error(ErrorCode::Config, "missing_rate must lie in [0, 1)");
  if (event_week_min > event_week_max) throw Error(ErrorCode::Config, "event_week_range is empty");
  if (event_week_min - (half_width + 1) < 0 || event_week_max + half_width + 1 > n_weeks - 1)
    throw Error(ErrorCode::Config, "event_week_range must leave at least T+1 weeks on each side");
  if (effect_noise_delta0 < 0 || effect_noise_delta1 < 0) throw Error(ErrorCode::Config, "effect noise must be >= 0");
  if (min_users < 0 || max_users < min_users) throw Error(ErrorCode::Config, "invalid user-count range");
  if (sociodem_dim < 1 || embedding_dim < 1) throw Error(ErrorCode::Config, "meta/embedding dims must be >= 1");
  const std::size_t dim = effect_dim(*this);
  for (const auto* w : {&effect.weights0, &effect.weights1})
    if (!w->empty() && w->size() != dim)
      throw Error(ErrorCode::Dimension, std::string("effect_map weights must have length ") + std::to_string(dim) +
                                            " for " + kind_name(effect.kind));
}

SynthConfig SynthConfig::from_json(const json& j) {
  SynthConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "n_regions") c.n_regions = value.get<int>();
      else if (key == "n_weeks") c.n_weeks = value.get<int>();
      else if (key == "noise_sigma") c.noise_sigma = value.get<double>();
      else if (key == "ar_coefficient") c.ar_coefficient = value.get<double>();
      else if (key == "seasonal_amplitude") c.seasonal_amplitude = value.get<double>();
      else if (key == "event_week_range") {
        const auto r = value.get<std::vector<int>>();
        if (r.size() != 2) throw Error(ErrorCode::Config, "event_week_range needs [min, max]");
        c.event_week_min = r[0];
        c.event_week_max = r[1];
      } else if (key == "effect_map") {
        c.effect.kind = parse_kind(value.at("kind").get<std::string>());
        c.effect.delta0 = value.value("delta0", 0.0);
        c.effect.delta1 = value.value("delta1", 0.0);
        c.effect.weights0 = value.value("weights0", std::vector<double>{});
        c.effect.weights1 = value.value("weights1", std::vector<double>{});
        c.effect.weight_scale = value.value("weight_scale", 1.0);
      } else if (key == "effect_noise") {
        const auto r = value.get<std::vector<double>>();
        if (r.size() != 2) throw Error(ErrorCode::Config, "effect_noise needs [sd_delta0, sd_delta1]");
        c.effect_noise_delta0 = r[0];
        c.effect_noise_delta1 = r[1];
      } else if (key == "missing_rate") c.missing_rate = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "half_width") c.half_width = value.get<int>();
      else if (key == "sociodem_dim") c.sociodem_dim = value.get<std::size_t>();
      else if (key == "embedding_dim") c.embedding_dim = value.get<std::size_t>();
      else if (key == "level_sd") c.level_sd = value.get<double>();
      else if (key == "slope_sd") c.slope_sd = value.get<double>();
      else if (key == "covariate") c.covariate = value.get<bool>();
      else if (key == "event_type") c.event_type = value.get<std::string>();
      else if (key == "score_name") c.score_name = value.get<std::string>();
      else if (key == "users_range") {
        const auto r = value.get<std::vector<std::int64_t>>();
        if (r.size() != 2) throw Error(ErrorCode::Config, "users_range needs [min, max]");
        c.min_users = r[0];
        c.max_users = r[1];
      } else {
        throw Error(ErrorCode::Config, "unknown synth config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Config, std::string("synth config: ") + e.what());
  }
  c.validate();
  return c;
}

json SynthConfig::to_json() const {
  return {{"n_regions", n_regions},
          {"n_weeks", n_weeks},
          {"noise_sigma", noise_sigma},
          {"ar_coefficient", ar_coefficient},
          {"seasonal_amplitude", seasonal_amplitude},
          {"event_week_range", {event_week_min, event_week_max}},
          {"effect_map",
           {{"kind", kind_name(effect.kind)},
            {"delta0", effect.delta0},
            {"delta1", effect.delta1},
            {"weights0", effect.weights0},
            {"weights1", effect.weights1},
            {"weight_scale", effect.weight_scale}}},
          {"effect_noise", {effect_noise_delta0, effect_noise_delta1}},
          {"missing_rate", missing_rate},
          {"seed", seed},
          {"half_width", half_width},
          {"sociodem_dim", sociodem_dim},
          {"embedding_dim", embedding_dim},
          {"level_sd", level_sd},
          {"slope_sd", slope_sd},
          {"covariate", covariate},
          {"event_type", event_type},
          {"score_name", score_name},
          {"users_range", {min_users, max_users}}};
}

json GroundTruth::to_json() const {
  json regions_json = json::object();
  for (const auto& [id, t] : regions)
    regions_json[id] = {{"delta0", t.delta0}, {"delta1", t.delta1}, {"beta0", t.beta0},
                        {"beta1", t.beta1}, {"event_week", t.event_week}};
  return {{"regions", regions_json}, {"weights0", weights0}, {"weights1", weights1}};
}

SynthData generate(const SynthConfig& config) {
  config.validate();
  const auto n = static_cast<std::size_t>(config.n_regions);
  SynthData data;
  data.panel.score_name = config.score_name;
  data.embeddings.dimension = config.embedding_dim;

  std::vector<RegionId> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = std::to_string(10001 + i);

  // effect weights
  const std::size_t dim = effect_dim(config);
  data.truth.weights0 = config.effect.weights0;
  if (data.truth.weights0.empty() && dim > 0) {
    auto rng = substream(config.seed, kWeights);
    data.truth.weights0.resize(dim);
    for (auto& x : data.truth.weights0)
      x = standard_normal(rng) * config.effect.weight_scale / std::sqrt(static_cast<double>(dim));
  }
  data.truth.weights1 = config.effect.weights1;
  if (data.truth.weights1.empty()) data.truth.weights1.assign(dim, 0.0);

  // grid layout for coordinates and adjacency
  const auto side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));

  struct RegionOut {
    std::vector<Observation> series;
    std::vector<Observation> cov_series;
    RegionMeta meta;
    std::vector<double> embedding;
    RegionTruth truth;
  };
  std::vector<RegionOut> out(n);
  parallel_for(n, [&](std::size_t i) {
    RegionOut& r = out[i];
    // metadata
    auto mrng = region_stream(config.seed, i, kMeta);
    r.meta.region_id = ids[i];
    for (std::size_t k = 0; k < config.sociodem_dim; ++k) r.meta.sociodemographics.push_back(standard_normal(mrng));
    const double s0 = r.meta.sociodemographics[0];
    const double s1 = config.sociodem_dim > 1 ? r.meta.sociodemographics[1] : 0.0;
    r.meta.education = 0.3 + 0.08 * s0 + 0.03 * standard_normal(mrng);
    r.meta.income = 55000.0 + 12000.0 * s1 + 4000.0 * standard_normal(mrng);
    r.meta.population = std::exp(10.0 + 1.2 * standard_normal(mrng));
    r.meta.area_sq_miles = std::exp(6.0 + 0.7 * standard_normal(mrng));
    const std::size_t row = i / side, col = i % side;
    r.meta.latitude = 30.0 + 18.0 * (static_cast<double>(row) + uniform01(mrng)) / static_cast<double>(side);
    r.meta.longitude = -120.0 + 45.0 * (static_cast<double>(col) + uniform01(mrng)) / static_cast<double>(side);
    auto link = [&](std::size_t j) {
      if (j < n && j != i) r.meta.adjacent_regions.insert(ids[j]);
    };
    if (col > 0) link(i - 1);
    if (col + 1 < side) link(i + 1);
    if (row > 0) link(i - side);
    link(i + side);

    auto erng = region_stream(config.seed, i, kEmbedding);
    r.embedding.resize(config.embedding_dim);
    for (auto& x : r.embedding) x = standard_normal(erng);

    // trend and effect
    auto trng = region_stream(config.seed, i, kTrend);
    RegionTruth& t = r.truth;
    t.event_week = config.event_week_min +
                   static_cast<int>(uniform_index(trng, static_cast<std::size_t>(config.event_week_max - config.event_week_min + 1)));
    t.beta0 = config.level_sd * standard_normal(trng);
    t.beta1 = config.slope_sd * standard_normal(trng);
    std::vector<double> x;
    switch (config.effect.kind) {
      case EffectKind::LinearInMeta: x = r.meta.sociodemographics; break;
      case EffectKind::LinearInEmbedding: x = r.embedding; break;
      case EffectKind::LinearInHistory: x = {t.beta0, t.beta1}; break;
      default: break;
    }
    if (config.effect.kind != EffectKind::Zero) {
      t.delta0 = config.effect.delta0 + dot(data.truth.weights0, x);
      t.delta1 = config.effect.delta1 + dot(data.truth.weights1, x);
    }
    t.delta0 += config.effect_noise_delta0 * standard_normal(trng);
    t.delta1 += config.effect_noise_delta1 * standard_normal(trng);

    // series with AR(1) noise, stationary start
    auto srng = region_stream(config.seed, i, kSeries);
    auto crng = region_stream(config.seed, i, kCovariate);
    auto missing = region_stream(config.seed, i, kMissing);
    const double phi = config.ar_coefficient;
    double e = config.noise_sigma / std::sqrt(1.0 - phi * phi) * standard_normal(srng);
    double ce = config.noise_sigma / std::sqrt(1.0 - phi * phi) * standard_normal(crng);
    for (int w = 0; w < config.n_weeks; ++w) {
      if (w > 0) {
        e = phi * e + config.noise_sigma * standard_normal(srng);
        ce = phi * ce + config.noise_sigma * standard_normal(crng);
      }
      const double off = w - t.event_week;
      double signal = t.beta0 + t.beta1 * off;
      if (off >= 0) signal += t.delta0 + t.delta1 * off;
      signal += config.seasonal_amplitude * std::sin(2.0 * M_PI * w / 52.0);
      const auto users = config.min_users + static_cast<std::int64_t>(
                                                uniform_index(srng, static_cast<std::size_t>(config.max_users - config.min_users + 1)));
      const bool drop = config.missing_rate > 0.0 && uniform01(missing) < config.missing_rate;
      if (drop) continue;
      r.series.push_back({w, signal + e, users});
      if (config.covariate) r.cov_series.push_back({w, 0.5 * signal + ce, users});
    }
  });

  for (std::size_t i = 0; i < n; ++i) {
    data.panel.regions.emplace(ids[i], std::move(out[i].series));
    if (config.covariate) {
      if (!data.covariate) {
        data.covariate.emplace();
        data.covariate->score_name = "depression";
      }
      data.covariate->regions.emplace(ids[i], std::move(out[i].cov_series));
    }
    data.events.entries.emplace(std::make_pair(ids[i], config.event_type), out[i].truth.event_week);
    data.meta.emplace(ids[i], std::move(out[i].meta));
    data.embeddings.vectors.emplace(ids[i], std::move(out[i].embedding));
    data.truth.regions.emplace(ids[i], out[i].truth);
  }
  return data;
}

std::vector<std::string> write_synth(const SynthData& data, const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create '" + out_dir + "': " + ec.message());
  const auto path = [&](const char* name) { return (std::filesystem::path(out_dir) / name).string(); };
  std::vector<std::string> written;
  auto put = [&](const char* name, const std::string& content) {
    csv::write_file(path(name), content);
    written.push_back(path(name));
  };
  put("panel.csv", panel_to_csv(data.panel));
  put("events.csv", events_to_csv(data.events));
  put("meta.csv", meta_to_csv(data.meta));
  put("embeddings.csv", embeddings_to_csv(data.embeddings));
  if (data.covariate) put("covariate.csv", panel_to_csv(*data.covariate));
  put("ground_truth.json", data.truth.to_json().dump(2) + "\n");
  return written;
}

}  // namespace ruptura
