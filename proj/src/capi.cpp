#include "ruptura/ruptura.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <array>
#include <memory>
#include <new>
#include <string>

#include <json.hpp>

#include "ruptura/csv.hpp"
#include "ruptura/did_match.hpp"
#include "ruptura/error.hpp"
#include "ruptura/evaluator.hpp"
#include "ruptura/feature_builder.hpp"
#include "ruptura/learners.hpp"
#include "ruptura/panel_store.hpp"
#include "ruptura/parallel.hpp"
#include "ruptura/placebo.hpp"
#include "ruptura/rdd_estimator.hpp"
#include "ruptura/reports.hpp"
#include "ruptura/synth_oracle.hpp"

using nlohmann::json;

struct ruptura_panel {
  ruptura::Panel value;
};
struct ruptura_events {
  ruptura::EventTable value;
};
struct ruptura_meta {
  ruptura::MetaTable value;
};
struct ruptura_embeddings {
  ruptura::EmbeddingTable value;
};
struct ruptura_dataset {
  ruptura::Dataset value;
};
struct ruptura_model {
  ruptura::TrainedModel value;
};

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size());
  out[s.size()] = '\0';
  return out;
}

template <typename Fn>
ruptura_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return RUPTURA_OK;
  } catch (const ruptura::Error& e) {
    g_last_error = e.what();
    return static_cast<ruptura_status>(static_cast<int>(e.code()));
  } catch (const json::exception& e) {
    g_last_error = std::string("invalid JSON option: ") + e.what();
    return RUPTURA_E_CONFIG;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return RUPTURA_E_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return RUPTURA_E_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) throw ruptura::Error(ruptura::ErrorCode::InvalidArgument, std::string(what) + " is NULL");
}

json parse_options(const char* text) {
  if (!text || !*text) return json::object();
  json j = json::parse(text);
  if (!j.is_object()) throw ruptura::Error(ruptura::ErrorCode::Config, "options must be a JSON object");
  return j;
}

std::optional<std::string> opt_string(const char* s) {
  if (!s || !*s) return std::nullopt;
  return std::string(s);
}

ruptura::WindowConfig window_from(const json& j) {
  ruptura::WindowConfig w;
  for (const auto& [key, value] : j.items()) {
    if (key == "half_width") w.half_width = value.get<int>();
    else if (key == "buffer") w.buffer = value.get<int>();
    else if (key == "min_points_per_segment") w.min_points_per_segment = value.get<int>();
    else throw ruptura::Error(ruptura::ErrorCode::Config, "unknown window key '" + key + "'");
  }
  w.validate();
  return w;
}

ruptura::ModelSpec spec_from(const json& j) {
  if (!j.contains("family")) throw ruptura::Error(ruptura::ErrorCode::Config, "model spec needs a family");
  ruptura::ModelSpec spec;
  spec.family = ruptura::parse_family(j.at("family").get<std::string>());
  for (const auto& [key, value] : j.items()) {
    if (key == "family") continue;
    if (key == "hyperparameters") {
      for (const auto& [name, v] : value.items()) spec.hyperparameters[name] = v.get<double>();
    } else if (key == "seed") {
      spec.seed = value.get<std::uint64_t>();
    } else if (key == "per_target") {
      spec.per_target = value.get<bool>();
    } else {
      throw ruptura::Error(ruptura::ErrorCode::Config, "unknown model spec key '" + key + "'");
    }
  }
  spec.validate();
  return spec;
}

json layout_json(const ruptura::Layout& layout) {
  json blocks = json::array();
  for (const auto& b : layout.blocks) blocks.push_back({{"name", b.name}, {"offset", b.offset}, {"length", b.length}});
  return {{"dimension", layout.dimension()}, {"blocks", blocks}};
}

std::string fnv_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

extern "C" {

const char* ruptura_version(void) { return RUPTURA_VERSION_STRING; }

const char* ruptura_last_error(void) { return g_last_error.c_str(); }

const char* ruptura_status_name(ruptura_status status) {
  if (status == RUPTURA_OK) return "ok";
  if (status == RUPTURA_E_INTERNAL) return "internal";
  if (status >= RUPTURA_E_IO && status <= RUPTURA_E_INVALID_ARGUMENT)
    return ruptura::to_string(static_cast<ruptura::ErrorCode>(status));
  return "unknown";
}

void ruptura_string_free(char* s) { std::free(s); }

void ruptura_set_threads(int n) { ruptura::set_thread_count(n); }

void ruptura_set_warnings(int enabled) { ruptura::set_warnings_enabled(enabled != 0); }

ruptura_status ruptura_file_digest(const char* path, char** out_hex) {
  return guarded([&] {
    require(path, "path");
    require(out_hex, "out_hex");
    *out_hex = dup_string(fnv_hex(ruptura::csv::read_file(path)));
  });
}

ruptura_status ruptura_panel_load(const char* path, const char* score_name, const char* epoch_date,
                                  ruptura_panel** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto p = std::make_unique<ruptura_panel>();
    p->value = ruptura::load_panel(path, score_name ? score_name : "score", opt_string(epoch_date));
    *out = p.release();
  });
}

void ruptura_panel_free(ruptura_panel* panel) { delete panel; }

ruptura_status ruptura_panel_save(const ruptura_panel* panel, const char* path) {
  return guarded([&] {
    require(panel, "panel");
    require(path, "path");
    ruptura::csv::write_file(path, ruptura::panel_to_csv(panel->value));
  });
}

size_t ruptura_panel_region_count(const ruptura_panel* panel) { return panel ? panel->value.regions.size() : 0; }

size_t ruptura_panel_observation_count(const ruptura_panel* panel) {
  return panel ? panel->value.observation_count() : 0;
}

ruptura_status ruptura_panel_transform_log(const ruptura_panel* panel, char** out_json) {
  return guarded([&] {
    require(panel, "panel");
    require(out_json, "out_json");
    *out_json = dup_string(json(panel->value.transform_log).dump());
  });
}

ruptura_status ruptura_panel_filter_reliability(ruptura_panel* panel, int64_t min_users) {
  return guarded([&] {
    require(panel, "panel");
    panel->value = ruptura::filter_reliability(panel->value, min_users);
  });
}

ruptura_status ruptura_panel_zscore(ruptura_panel* panel) {
  return guarded([&] {
    require(panel, "panel");
    panel->value = ruptura::zscore_per_region(panel->value);
  });
}

ruptura_status ruptura_panel_difference(ruptura_panel* panel, int lag) {
  return guarded([&] {
    require(panel, "panel");
    panel->value = ruptura::difference(panel->value, lag);
  });
}

ruptura_status ruptura_events_load(const char* path, const char* epoch_date, ruptura_events** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto e = std::make_unique<ruptura_events>();
    e->value = ruptura::load_events(path, opt_string(epoch_date));
    *out = e.release();
  });
}

void ruptura_events_free(ruptura_events* events) { delete events; }

size_t ruptura_events_count(const ruptura_events* events) { return events ? events->value.entries.size() : 0; }

ruptura_status ruptura_meta_load(const char* path, ruptura_meta** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto m = std::make_unique<ruptura_meta>();
    m->value = ruptura::load_region_meta(path);
    *out = m.release();
  });
}

void ruptura_meta_free(ruptura_meta* meta) { delete meta; }

ruptura_status ruptura_embeddings_load(const char* path, ruptura_embeddings** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto e = std::make_unique<ruptura_embeddings>();
    e->value = ruptura::load_embeddings(path);
    *out = e.release();
  });
}

void ruptura_embeddings_free(ruptura_embeddings* embeddings) { delete embeddings; }

size_t ruptura_embeddings_dimension(const ruptura_embeddings* embeddings) {
  return embeddings ? embeddings->value.dimension : 0;
}

ruptura_status ruptura_estimate(const ruptura_panel* panel, const ruptura_events* events, const char* event_type,
                                const char* window_json, char** out_outcomes_csv, char** out_stats_json) {
  return guarded([&] {
    require(panel, "panel");
    require(events, "events");
    require(event_type, "event_type");
    const auto window = window_from(parse_options(window_json));
    const auto result = ruptura::batch_estimate(panel->value, events->value, event_type, window);
    json stats = ruptura::to_json(result);
    stats["event_type"] = event_type;
    stats["window"] = ruptura::to_json(window);
    std::string csv_text = ruptura::outcomes_to_csv(result.outcomes);
    std::string stats_text = stats.dump(2) + "\n";
    if (out_outcomes_csv) *out_outcomes_csv = dup_string(csv_text);
    if (out_stats_json) *out_stats_json = dup_string(stats_text);
  });
}

ruptura_status ruptura_placebo(const ruptura_panel* panel, size_t n_episodes, const char* window_json, uint64_t seed,
                               char** out_summary_json) {
  return guarded([&] {
    require(panel, "panel");
    require(out_summary_json, "out_summary_json");
    const auto window = window_from(parse_options(window_json));
    const auto summary = ruptura::placebo_run(panel->value, n_episodes, window, seed);
    json j = ruptura::to_json(summary);
    j["window"] = ruptura::to_json(window);
    *out_summary_json = dup_string(j.dump(2) + "\n");
  });
}

ruptura_status ruptura_dataset_build(const ruptura_panel* panel, const ruptura_events* events, const char* event_type,
                                     const ruptura_panel* covariate, const ruptura_embeddings* embeddings,
                                     const char* features, const char* window_json, ruptura_dataset** out) {
  return guarded([&] {
    require(panel, "panel");
    require(events, "events");
    require(event_type, "event_type");
    require(features, "features");
    require(out, "out");
    const auto spec = ruptura::FeatureSetSpec::parse(features);
    const auto window = window_from(parse_options(window_json));
    if (spec.use_cov && !covariate)
      throw ruptura::Error(ruptura::ErrorCode::MissingCovariate, "feature set includes cov but no covariate panel given");
    if (spec.use_exog && !embeddings)
      throw ruptura::Error(ruptura::ErrorCode::MissingExog, "feature set includes exog but no embeddings given");
    const auto main = ruptura::batch_estimate(panel->value, events->value, event_type, window);
    ruptura::BatchResult cov;
    if (covariate) cov = ruptura::batch_estimate(covariate->value, events->value, event_type, window);
    auto assembled = ruptura::assemble_dataset(main.outcomes, main.windows, cov.outcomes, cov.windows,
                                               embeddings ? &embeddings->value : nullptr, spec);
    auto d = std::make_unique<ruptura_dataset>();
    d->value = std::move(assembled.dataset);
    d->value.window = window;
    *out = d.release();
  });
}

void ruptura_dataset_free(ruptura_dataset* dataset) { delete dataset; }

size_t ruptura_dataset_rows(const ruptura_dataset* dataset) { return dataset ? dataset->value.rows() : 0; }

size_t ruptura_dataset_dimension(const ruptura_dataset* dataset) {
  return dataset ? dataset->value.layout.dimension() : 0;
}

ruptura_status ruptura_dataset_layout(const ruptura_dataset* dataset, char** out_json) {
  return guarded([&] {
    require(dataset, "dataset");
    require(out_json, "out_json");
    *out_json = dup_string(ruptura::dataset_layout_json(dataset->value));
  });
}

ruptura_status ruptura_dataset_save(const ruptura_dataset* dataset, const char* csv_path, const char* layout_path) {
  return guarded([&] {
    require(dataset, "dataset");
    require(csv_path, "csv_path");
    require(layout_path, "layout_path");
    ruptura::csv::write_file(csv_path, ruptura::dataset_to_csv(dataset->value));
    ruptura::csv::write_file(layout_path, ruptura::dataset_layout_json(dataset->value));
  });
}

ruptura_status ruptura_dataset_load(const char* csv_path, const char* layout_path, ruptura_dataset** out) {
  return guarded([&] {
    require(csv_path, "csv_path");
    require(layout_path, "layout_path");
    require(out, "out");
    auto d = std::make_unique<ruptura_dataset>();
    d->value = ruptura::dataset_from_files(csv_path, layout_path);
    *out = d.release();
  });
}

ruptura_status ruptura_dataset_split(const ruptura_dataset* dataset, const char* split_json, ruptura_split_part part,
                                     ruptura_dataset** out) {
  return guarded([&] {
    require(dataset, "dataset");
    require(out, "out");
    const json j = parse_options(split_json);
    std::array<double, 3> ratios{0.6, 0.2, 0.2};
    std::uint64_t seed = 0;
    for (const auto& [key, value] : j.items()) {
      if (key == "ratios") {
        const auto r = value.get<std::vector<double>>();
        if (r.size() != 3) throw ruptura::Error(ruptura::ErrorCode::Config, "split ratios need three values");
        ratios = {r[0], r[1], r[2]};
      } else if (key == "seed") {
        seed = value.get<std::uint64_t>();
      } else {
        throw ruptura::Error(ruptura::ErrorCode::Config, "unknown split key '" + key + "'");
      }
    }
    const auto plan = ruptura::split_by_region(dataset->value.region_ids, ratios, seed);
    ruptura::SplitPart p = ruptura::SplitPart::Train;
    switch (part) {
      case RUPTURA_SPLIT_TRAIN: p = ruptura::SplitPart::Train; break;
      case RUPTURA_SPLIT_DEV: p = ruptura::SplitPart::Dev; break;
      case RUPTURA_SPLIT_TEST: p = ruptura::SplitPart::Test; break;
      default: throw ruptura::Error(ruptura::ErrorCode::InvalidArgument, "unknown split part");
    }
    auto d = std::make_unique<ruptura_dataset>();
    d->value = ruptura::select_split(dataset->value, plan, p);
    *out = d.release();
  });
}

ruptura_status ruptura_model_spec_validate(const char* spec_json) {
  return guarded([&] { spec_from(parse_options(spec_json)); });
}

ruptura_status ruptura_model_train(const ruptura_dataset* dataset, const char* spec_json, ruptura_model** out) {
  return guarded([&] {
    require(dataset, "dataset");
    require(out, "out");
    const auto spec = spec_from(parse_options(spec_json));
    auto m = std::make_unique<ruptura_model>();
    m->value = ruptura::train(spec, dataset->value);
    *out = m.release();
  });
}

void ruptura_model_free(ruptura_model* model) { delete model; }

ruptura_status ruptura_model_save(const ruptura_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    ruptura::save_model(model->value, path);
  });
}

ruptura_status ruptura_model_load(const char* path, ruptura_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto m = std::make_unique<ruptura_model>();
    m->value = ruptura::load_model(path);
    *out = m.release();
  });
}

ruptura_status ruptura_model_describe(const ruptura_model* model, char** out_json) {
  return guarded([&] {
    require(model, "model");
    require(out_json, "out_json");
    const auto& spec = model->value.spec;
    json j = {{"family", ruptura::family_name(spec.family)},
              {"hyperparameters", spec.hyperparameters},
              {"seed", spec.seed},
              {"per_target", spec.per_target},
              {"layout", layout_json(model->value.layout)}};
    *out_json = dup_string(j.dump(2) + "\n");
  });
}

ruptura_status ruptura_model_predict(const ruptura_model* model, const ruptura_dataset* dataset, double* out,
                                     size_t capacity) {
  return guarded([&] {
    require(model, "model");
    require(dataset, "dataset");
    const auto pred = ruptura::predict(model->value, dataset->value);
    const auto n = static_cast<std::size_t>(pred.rows());
    if (capacity < 2 * n)
      throw ruptura::Error(ruptura::ErrorCode::InvalidArgument,
                           "prediction buffer holds " + std::to_string(capacity) + " values, need " +
                               std::to_string(2 * n));
    require(out, "out");
    for (std::size_t i = 0; i < n; ++i) {
      out[2 * i] = pred(static_cast<Eigen::Index>(i), 0);
      out[2 * i + 1] = pred(static_cast<Eigen::Index>(i), 1);
    }
  });
}

ruptura_status ruptura_evaluate(const ruptura_model* model, const ruptura_dataset* train, const ruptura_dataset* test,
                                const ruptura_meta* meta, const char* options_json, char** out_report_json,
                                char** out_predictions_csv) {
  return guarded([&] {
    require(model, "model");
    require(test, "test");
    require(out_report_json, "out_report_json");
    const json opts = parse_options(options_json);
    std::optional<std::string> baseline;
    std::optional<ruptura::StratumSpec> strata;
    int n_bins = 3;
    std::vector<double> thresholds;
    for (const auto& [key, value] : opts.items()) {
      if (key == "baseline") {
        if (!value.is_null()) baseline = value.get<std::string>();
      } else if (key == "strata") {
        if (!value.is_null()) {
          strata.emplace();
          strata->key = ruptura::parse_stratum_key(value.get<std::string>());
        }
      } else if (key == "n_bins") {
        n_bins = value.get<int>();
      } else if (key == "thresholds") {
        thresholds = value.get<std::vector<double>>();
      } else {
        throw ruptura::Error(ruptura::ErrorCode::Config, "unknown evaluate option '" + key + "'");
      }
    }
    const auto& ds = test->value;
    const ruptura::Matrix pred = ruptura::predict(model->value, ds);

    ruptura::Matrix base_pred;
    std::string base_name;
    if (baseline) {
      require(train, "train");
      auto spec = ruptura::ModelSpec::defaults(ruptura::parse_family(*baseline));
      spec.seed = model->value.spec.seed;
      base_name = ruptura::family_name(spec.family);
      const auto base_model = ruptura::train(spec, train->value);
      base_pred = ruptura::predict(base_model, ds);
    }
    const ruptura::Matrix* bp = baseline ? &base_pred : nullptr;

    auto report = ruptura::evaluate_predictions(pred, ds.targets, bp, base_name);
    json j = ruptura::to_json(report);
    j["model"] = ruptura::family_name(model->value.spec.family);
    if (strata) {
      if (!meta) throw ruptura::Error(ruptura::ErrorCode::InvalidArgument, "stratified evaluation needs region metadata");
      strata->n_bins = n_bins;
      strata->thresholds = thresholds;
      strata->validate();
      const auto strat = ruptura::stratify_and_eval(pred, ds.targets, ds.region_ids, meta->value, *strata, bp, base_name);
      json s = ruptura::to_json(strat);
      j["strata"] = s.contains("strata") ? s["strata"] : json::object();
      j["strata_key"] = opts.at("strata");
    }
    *out_report_json = dup_string(j.dump(2) + "\n");

    if (out_predictions_csv) {
      std::string text = "region_id,event_type,delta0,delta1,pred_delta0,pred_delta1";
      if (bp) text += ",baseline_delta0,baseline_delta1";
      text += "\n";
      for (std::size_t i = 0; i < ds.rows(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        text += ds.region_ids[i] + "," + ds.event_types[i] + "," + ruptura::csv::format(ds.targets(r, 0)) + "," +
                ruptura::csv::format(ds.targets(r, 1)) + "," + ruptura::csv::format(pred(r, 0)) + "," +
                ruptura::csv::format(pred(r, 1));
        if (bp) text += "," + ruptura::csv::format(base_pred(r, 0)) + "," + ruptura::csv::format(base_pred(r, 1));
        text += "\n";
      }
      *out_predictions_csv = dup_string(text);
    }
  });
}

ruptura_status ruptura_did(const ruptura_panel* panel, const ruptura_events* events, const ruptura_meta* meta,
                           const char* target_region, const char* options_json, char** out_result_json) {
  return guarded([&] {
    require(panel, "panel");
    require(events, "events");
    require(meta, "meta");
    require(target_region, "target_region");
    require(out_result_json, "out_result_json");
    const json opts = parse_options(options_json);
    ruptura::DiDOptions o;
    for (const auto& [key, value] : opts.items()) {
      if (key == "event_type") o.event_type = value.get<std::string>();
      else if (key == "k") o.k = value.get<std::size_t>();
      else if (key == "window") o.window = window_from(value);
      else throw ruptura::Error(ruptura::ErrorCode::Config, "unknown did option '" + key + "'");
    }
    if (o.event_type.empty()) throw ruptura::Error(ruptura::ErrorCode::Config, "did needs an event_type");
    const auto result = ruptura::did_run(panel->value, events->value, meta->value, target_region, o);
    json j = ruptura::to_json(result);
    j["event_type"] = o.event_type;
    j["k"] = o.k;
    *out_result_json = dup_string(j.dump(2) + "\n");
  });
}

ruptura_status ruptura_synth(const char* config_json, const char* out_dir, char** out_paths_json) {
  return guarded([&] {
    require(out_dir, "out_dir");
    const auto config = ruptura::SynthConfig::from_json(parse_options(config_json));
    const auto data = ruptura::generate(config);
    const auto paths = ruptura::write_synth(data, out_dir);
    if (out_paths_json) *out_paths_json = dup_string(json(paths).dump());
  });
}

ruptura_status ruptura_synth_resolve(const char* config_json, char** out_json) {
  return guarded([&] {
    require(out_json, "out_json");
    const auto config = ruptura::SynthConfig::from_json(parse_options(config_json));
    *out_json = dup_string(config.to_json().dump(2) + "\n");
  });
}

}  // extern "C"
