// ruptura command-line front end. Links only the C API.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ruptura/ruptura.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;

struct CliError {
  int exit_code;
  std::string status;
  std::string message;
};

[[noreturn]] void usage_error(const std::string& message) { throw CliError{kExitUsage, "usage", message}; }

void check(ruptura_status st) {
  if (st == RUPTURA_OK) return;
  // Bad option values surface as config errors from the library.
  const int code = st == RUPTURA_E_CONFIG ? kExitUsage : kExitDomain;
  throw CliError{code, ruptura_status_name(st), ruptura_last_error()};
}

std::string take(char* s) {
  std::string out = s ? s : "";
  ruptura_string_free(s);
  return out;
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using PanelPtr = std::unique_ptr<ruptura_panel, Deleter<ruptura_panel, ruptura_panel_free>>;
using EventsPtr = std::unique_ptr<ruptura_events, Deleter<ruptura_events, ruptura_events_free>>;
using MetaPtr = std::unique_ptr<ruptura_meta, Deleter<ruptura_meta, ruptura_meta_free>>;
using EmbPtr = std::unique_ptr<ruptura_embeddings, Deleter<ruptura_embeddings, ruptura_embeddings_free>>;
using DatasetPtr = std::unique_ptr<ruptura_dataset, Deleter<ruptura_dataset, ruptura_dataset_free>>;
using ModelPtr = std::unique_ptr<ruptura_model, Deleter<ruptura_model, ruptura_model_free>>;

const char* c_or_null(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

PanelPtr load_panel(const std::string& path, const std::string& score, const std::string& epoch) {
  ruptura_panel* p = nullptr;
  check(ruptura_panel_load(path.c_str(), score.c_str(), c_or_null(epoch), &p));
  return PanelPtr(p);
}

EventsPtr load_events(const std::string& path, const std::string& epoch) {
  ruptura_events* e = nullptr;
  check(ruptura_events_load(path.c_str(), c_or_null(epoch), &e));
  return EventsPtr(e);
}

MetaPtr load_meta(const std::string& path) {
  ruptura_meta* m = nullptr;
  check(ruptura_meta_load(path.c_str(), &m));
  return MetaPtr(m);
}

EmbPtr load_embeddings(const std::string& path) {
  ruptura_embeddings* e = nullptr;
  check(ruptura_embeddings_load(path.c_str(), &e));
  return EmbPtr(e);
}

DatasetPtr load_dataset(const std::string& csv, const std::string& layout) {
  ruptura_dataset* d = nullptr;
  check(ruptura_dataset_load(csv.c_str(), layout.c_str(), &d));
  return DatasetPtr(d);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError{kExitDomain, "io", "cannot open " + path};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CliError{kExitDomain, "io", "cannot write " + path};
  out << text;
  if (!out) throw CliError{kExitDomain, "io", "write failed for " + path};
}

std::uint64_t default_seed() {
  if (const char* env = std::getenv("RUPTURA_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    usage_error(std::string("RUPTURA_SEED is not an unsigned integer: ") + env);
  }
  return 42;
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    usage_error("config " + path + ": " + e.what());
  }
  if (!j.is_object()) usage_error("config " + path + " must hold a JSON object");
  return j;
}

// Config values replace flag values key by key; keys the subcommand does not
// know are rejected.
void apply_config(json& resolved, const json& config, const std::string& where) {
  for (const auto& [key, value] : config.items()) {
    if (!resolved.contains(key)) usage_error("unknown " + where + " config key '" + key + "'");
    resolved[key] = value;
  }
}

template <typename T>
T field(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    usage_error(std::string("config key '") + key + "': " + e.what());
  }
}

struct Manifest {
  std::string subcommand;
  json config;
  std::vector<std::string> inputs;
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;

  // Written next to the first output as <output>.manifest.json.
  std::string write() const {
    json digests = json::object();
    for (const auto& in : inputs) {
      if (in.empty()) continue;
      char* hex = nullptr;
      check(ruptura_file_digest(in.c_str(), &hex));
      digests[in] = take(hex);
    }
    json j = {{"subcommand", subcommand}, {"config", config},      {"inputs", digests},
              {"seed", seed},             {"version", ruptura_version()}, {"outputs", outputs}};
    const std::string path = outputs.front() + ".manifest.json";
    write_text(path, j.dump(2) + "\n");
    return path;
  }
};

// ---- window flags shared by several subcommands ----

struct WindowFlags {
  int half_width = 9;
  int buffer = 1;
  int min_points = 3;

  void add(CLI::App* app) {
    app->add_option("--half-width", half_width, "Window half-width T in weeks")->capture_default_str();
    app->add_option("--buffer", buffer, "Event buffer b in weeks")->capture_default_str();
    app->add_option("--min-points", min_points, "Minimum observed points per segment")->capture_default_str();
  }
  json to_json() const {
    return {{"half_width", half_width}, {"buffer", buffer}, {"min_points_per_segment", min_points}};
  }
};

json window_field(const json& r) { return r.at("window"); }

// ---- ingest ----

json run_ingest(const json& r) {
  const auto panel_path = field<std::string>(r, "panel");
  const auto out = field<std::string>(r, "out");
  auto panel = load_panel(panel_path, field<std::string>(r, "score_name"), field<std::string>(r, "epoch_date"));
  const auto min_users = field<std::int64_t>(r, "min_users");
  if (min_users < 0) usage_error("min_users must be >= 0");
  check(ruptura_panel_filter_reliability(panel.get(), min_users));
  if (const int lag = field<int>(r, "difference_lag"); lag > 0) check(ruptura_panel_difference(panel.get(), lag));
  else if (lag < 0) usage_error("difference_lag must be >= 0");
  if (field<bool>(r, "zscore")) check(ruptura_panel_zscore(panel.get()));
  check(ruptura_panel_save(panel.get(), out.c_str()));

  char* log = nullptr;
  check(ruptura_panel_transform_log(panel.get(), &log));
  Manifest m{"ingest", r, {panel_path}, 0, {out}};
  m.config["transform_log"] = json::parse(take(log));
  m.write();
  return {{"regions", ruptura_panel_region_count(panel.get())},
          {"observations", ruptura_panel_observation_count(panel.get())}};
}

json ingest_defaults() {
  return {{"panel", ""},     {"score_name", "score"}, {"epoch_date", ""}, {"min_users", 200},
          {"zscore", false}, {"difference_lag", 0},  {"out", ""}};
}

// ---- estimate ----

json run_estimate(const json& r) {
  const auto panel_path = field<std::string>(r, "panel");
  const auto events_path = field<std::string>(r, "events");
  const auto epoch = field<std::string>(r, "epoch_date");
  auto panel = load_panel(panel_path, field<std::string>(r, "score_name"), epoch);
  auto events = load_events(events_path, epoch);
  const std::string window = window_field(r).dump();
  char* csv = nullptr;
  char* stats = nullptr;
  check(ruptura_estimate(panel.get(), events.get(), field<std::string>(r, "event_type").c_str(), window.c_str(), &csv,
                         &stats));
  const auto out_outcomes = field<std::string>(r, "out_outcomes");
  const auto out_stats = field<std::string>(r, "out_stats");
  write_text(out_outcomes, take(csv));
  const std::string stats_text = take(stats);
  write_text(out_stats, stats_text);
  Manifest{"estimate", r, {panel_path, events_path}, 0, {out_outcomes, out_stats}}.write();
  return json::parse(stats_text).at("n_outcomes");
}

json estimate_defaults() {
  return {{"panel", ""},      {"events", ""},       {"event_type", "first_case"},        {"score_name", "score"},
          {"epoch_date", ""}, {"window", WindowFlags{}.to_json()}, {"out_outcomes", ""}, {"out_stats", ""}};
}

// ---- placebo ----

json run_placebo(const json& r) {
  const auto panel_path = field<std::string>(r, "panel");
  auto panel = load_panel(panel_path, field<std::string>(r, "score_name"), field<std::string>(r, "epoch_date"));
  const auto episodes = field<std::int64_t>(r, "episodes");
  if (episodes < 1) usage_error("episodes must be >= 1");
  const auto seed = field<std::uint64_t>(r, "seed");
  const std::string window = window_field(r).dump();
  char* summary = nullptr;
  check(ruptura_placebo(panel.get(), static_cast<std::size_t>(episodes), window.c_str(), seed, &summary));
  const auto out = field<std::string>(r, "out");
  write_text(out, take(summary));
  Manifest{"placebo", r, {panel_path}, seed, {out}}.write();
  return json::object();
}

json placebo_defaults(std::uint64_t seed) {
  return {{"panel", ""},  {"score_name", "score"}, {"epoch_date", ""}, {"episodes", 5000},
          {"seed", seed}, {"window", WindowFlags{}.to_json()}, {"out", ""}};
}

// ---- features ----

std::string layout_path_for(const std::string& csv) {
  fs::path p(csv);
  p.replace_extension(".layout.json");
  return p.string();
}

json run_features(const json& r) {
  const auto panel_path = field<std::string>(r, "panel");
  const auto events_path = field<std::string>(r, "events");
  const auto cov_path = field<std::string>(r, "covariate");
  const auto emb_path = field<std::string>(r, "embeddings");
  const auto epoch = field<std::string>(r, "epoch_date");
  const auto score = field<std::string>(r, "score_name");
  auto panel = load_panel(panel_path, score, epoch);
  auto events = load_events(events_path, epoch);
  PanelPtr cov;
  if (!cov_path.empty()) cov = load_panel(cov_path, field<std::string>(r, "covariate_name"), epoch);
  EmbPtr emb;
  if (!emb_path.empty()) emb = load_embeddings(emb_path);

  const std::string window = window_field(r).dump();
  ruptura_dataset* ds = nullptr;
  check(ruptura_dataset_build(panel.get(), events.get(), field<std::string>(r, "event_type").c_str(), cov.get(),
                              emb.get(), field<std::string>(r, "features").c_str(), window.c_str(), &ds));
  DatasetPtr dataset(ds);
  const auto out = field<std::string>(r, "out");
  auto layout = field<std::string>(r, "out_layout");
  if (layout.empty()) layout = layout_path_for(out);
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  check(ruptura_dataset_save(dataset.get(), out.c_str(), layout.c_str()));
  Manifest{"features", r, {panel_path, events_path, cov_path, emb_path}, 0, {out, layout}}.write();
  return {{"rows", ruptura_dataset_rows(dataset.get())}, {"dimension", ruptura_dataset_dimension(dataset.get())}};
}

json features_defaults() {
  return {{"panel", ""},       {"events", ""},          {"event_type", "first_case"},
          {"covariate", ""},   {"covariate_name", "covariate"},
          {"embeddings", ""},  {"features", "P,RC"},    {"score_name", "score"},
          {"epoch_date", ""},  {"window", WindowFlags{}.to_json()},
          {"out", ""},         {"out_layout", ""}};
}

// ---- train ----

json split_json(const json& r, std::uint64_t seed) { return {{"ratios", r.at("split")}, {"seed", seed}}; }

std::uint64_t split_seed(const json& r, std::uint64_t fallback) {
  const auto& s = r.at("split_seed");
  return s.is_null() ? fallback : s.get<std::uint64_t>();
}

json model_spec(const json& r) {
  return {{"family", r.at("family")},
          {"hyperparameters", r.at("hyperparameters")},
          {"seed", r.at("seed")},
          {"per_target", r.at("per_target")}};
}

json run_train(const json& r) {
  const std::string spec = model_spec(r).dump();
  // Reject bad hyperparameters before touching any data.
  check(ruptura_model_spec_validate(spec.c_str()));

  const auto ds_path = field<std::string>(r, "dataset");
  auto layout = field<std::string>(r, "layout");
  if (layout.empty()) layout = layout_path_for(ds_path);
  auto dataset = load_dataset(ds_path, layout);
  const auto seed = field<std::uint64_t>(r, "seed");
  const std::string split = split_json(r, split_seed(r, seed)).dump();
  ruptura_dataset* train_ds = nullptr;
  check(ruptura_dataset_split(dataset.get(), split.c_str(), RUPTURA_SPLIT_TRAIN, &train_ds));
  DatasetPtr train(train_ds);

  ruptura_model* m = nullptr;
  check(ruptura_model_train(train.get(), spec.c_str(), &m));
  ModelPtr model(m);
  const auto out = field<std::string>(r, "out");
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  check(ruptura_model_save(model.get(), out.c_str()));
  Manifest{"train", r, {ds_path, layout}, seed, {out}}.write();
  return {{"train_rows", ruptura_dataset_rows(train.get())}};
}

json train_defaults(std::uint64_t seed) {
  return {{"dataset", ""},       {"layout", ""},        {"family", "ridge"}, {"hyperparameters", json::object()},
          {"per_target", false}, {"seed", seed},        {"split", {0.6, 0.2, 0.2}},
          {"split_seed", nullptr}, {"out", ""}};
}

// ---- evaluate ----

json run_evaluate(const json& r) {
  const auto model_path = field<std::string>(r, "model");
  const auto ds_path = field<std::string>(r, "dataset");
  auto layout = field<std::string>(r, "layout");
  if (layout.empty()) layout = layout_path_for(ds_path);
  const auto meta_path = field<std::string>(r, "meta");

  ruptura_model* m = nullptr;
  check(ruptura_model_load(model_path.c_str(), &m));
  ModelPtr model(m);
  char* desc = nullptr;
  check(ruptura_model_describe(model.get(), &desc));
  const auto model_seed = json::parse(take(desc)).at("seed").get<std::uint64_t>();

  auto dataset = load_dataset(ds_path, layout);
  const std::string split = split_json(r, split_seed(r, model_seed)).dump();
  const auto part_name = field<std::string>(r, "part");
  ruptura_split_part part = RUPTURA_SPLIT_TEST;
  if (part_name == "dev") part = RUPTURA_SPLIT_DEV;
  else if (part_name != "test") usage_error("part must be test or dev");
  ruptura_dataset* raw = nullptr;
  check(ruptura_dataset_split(dataset.get(), split.c_str(), RUPTURA_SPLIT_TRAIN, &raw));
  DatasetPtr train(raw);
  check(ruptura_dataset_split(dataset.get(), split.c_str(), part, &raw));
  DatasetPtr test(raw);

  MetaPtr meta;
  if (!meta_path.empty()) meta = load_meta(meta_path);
  json opts = json::object();
  if (const auto b = field<std::string>(r, "baseline"); !b.empty() && b != "none") opts["baseline"] = b;
  if (const auto s = field<std::string>(r, "strata"); !s.empty()) {
    opts["strata"] = s;
    opts["n_bins"] = r.at("n_bins");
    opts["thresholds"] = r.at("strata_thresholds");
  }
  const std::string opt_text = opts.dump();
  const auto predictions = field<std::string>(r, "predictions");
  char* report = nullptr;
  char* pred_csv = nullptr;
  check(ruptura_evaluate(model.get(), train.get(), test.get(), meta.get(), opt_text.c_str(), &report,
                         predictions.empty() ? nullptr : &pred_csv));
  const auto out = field<std::string>(r, "out");
  write_text(out, take(report));
  std::vector<std::string> outputs{out};
  if (!predictions.empty()) {
    write_text(predictions, take(pred_csv));
    outputs.push_back(predictions);
  }
  Manifest{"evaluate", r, {model_path, ds_path, layout, meta_path}, model_seed, outputs}.write();
  return {{"test_rows", ruptura_dataset_rows(test.get())}};
}

json evaluate_defaults() {
  return {{"model", ""},      {"dataset", ""},   {"layout", ""},        {"baseline", "mean"},
          {"strata", ""},     {"meta", ""},      {"strata_thresholds", json::array()},
          {"n_bins", 3},      {"split", {0.6, 0.2, 0.2}},               {"split_seed", nullptr},
          {"part", "test"},   {"out", ""},       {"predictions", ""}};
}

// ---- did ----

json run_did(const json& r) {
  const auto panel_path = field<std::string>(r, "panel");
  const auto events_path = field<std::string>(r, "events");
  const auto meta_path = field<std::string>(r, "meta");
  const auto epoch = field<std::string>(r, "epoch_date");
  auto panel = load_panel(panel_path, field<std::string>(r, "score_name"), epoch);
  auto events = load_events(events_path, epoch);
  auto meta = load_meta(meta_path);
  const auto k = field<std::int64_t>(r, "k");
  if (k < 1) usage_error("k must be >= 1");
  const json opts = {{"event_type", r.at("event_type")}, {"k", k}, {"window", window_field(r)}};
  const std::string opt_text = opts.dump();
  char* result = nullptr;
  check(ruptura_did(panel.get(), events.get(), meta.get(), field<std::string>(r, "target").c_str(), opt_text.c_str(),
                    &result));
  const auto out = field<std::string>(r, "out");
  write_text(out, take(result));
  Manifest{"did", r, {panel_path, events_path, meta_path}, 0, {out}}.write();
  return json::object();
}

// ---- synth ----

// Returns the resolved synth config and the written paths keyed by file stem.
json run_synth(const json& synth_config, const std::string& out_dir) {
  const std::string text = synth_config.dump();
  char* resolved = nullptr;
  check(ruptura_synth_resolve(text.c_str(), &resolved));
  const json config = json::parse(take(resolved));
  fs::create_directories(out_dir);
  char* paths = nullptr;
  check(ruptura_synth(text.c_str(), out_dir.c_str(), &paths));
  const json written = json::parse(take(paths));
  Manifest m{"synth", config, {}, config.at("seed").get<std::uint64_t>(), written.get<std::vector<std::string>>()};
  m.write();
  json by_stem = json::object();
  for (const auto& p : written) by_stem[fs::path(p.get<std::string>()).stem().string()] = p;
  return {{"config", config}, {"paths", by_stem}};
}

// ---- pipeline ----

json pipeline_defaults(std::uint64_t seed) {
  return {{"seed", seed},
          {"out_dir", ""},
          {"synth", nullptr},
          {"data", nullptr},
          {"ingest", {{"min_users", 200}, {"zscore", false}, {"difference_lag", 0}}},
          {"event_type", "first_case"},
          {"window", WindowFlags{}.to_json()},
          {"features", "P,RC"},
          {"model", {{"family", "ridge"}, {"hyperparameters", json::object()}, {"per_target", false}}},
          {"split", {0.6, 0.2, 0.2}},
          {"evaluate", {{"baseline", "mean"}, {"strata", ""}, {"n_bins", 3}, {"strata_thresholds", json::array()}}},
          {"placebo_episodes", 0}};
}

json merge_section(const json& defaults, const json& given, const std::string& name) {
  json out = defaults;
  if (given.is_null()) return out;
  if (!given.is_object()) usage_error("pipeline config '" + name + "' must be an object");
  apply_config(out, given, "pipeline." + name);
  return out;
}

json run_pipeline(const json& r) {
  const auto out_dir = field<std::string>(r, "out_dir");
  if (out_dir.empty()) usage_error("pipeline needs --out-dir");
  const auto seed = field<std::uint64_t>(r, "seed");
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  auto at = [&](const char* name) { return (dir / name).string(); };

  std::string panel_src, events_src, meta_src, emb_src, cov_src, score = "score";
  std::string cov_name = "covariate";
  if (!r.at("synth").is_null()) {
    json sc = r.at("synth");
    if (!sc.is_object()) usage_error("pipeline config 'synth' must be an object");
    if (!sc.contains("seed")) sc["seed"] = seed;
    const json s = run_synth(sc, at("data"));
    const auto& paths = s.at("paths");
    panel_src = paths.at("panel");
    events_src = paths.at("events");
    meta_src = paths.at("meta");
    emb_src = paths.at("embeddings");
    if (paths.contains("covariate")) cov_src = paths.at("covariate");
    score = s.at("config").at("score_name");
    cov_name = "depression";
  } else if (!r.at("data").is_null()) {
    const json d = merge_section({{"panel", ""},
                                  {"events", ""},
                                  {"meta", ""},
                                  {"embeddings", ""},
                                  {"covariate", ""},
                                  {"covariate_name", "covariate"},
                                  {"score_name", "score"}},
                                 r.at("data"), "data");
    panel_src = field<std::string>(d, "panel");
    events_src = field<std::string>(d, "events");
    meta_src = field<std::string>(d, "meta");
    emb_src = field<std::string>(d, "embeddings");
    cov_src = field<std::string>(d, "covariate");
    cov_name = field<std::string>(d, "covariate_name");
    score = field<std::string>(d, "score_name");
  } else {
    usage_error("pipeline config needs a 'synth' or 'data' section");
  }
  if (panel_src.empty() || events_src.empty()) usage_error("pipeline data needs panel and events");

  // Pipeline inputs use integer week indices; convert dated files with
  // ingest --epoch-date first.
  const json ing = merge_section(pipeline_defaults(0).at("ingest"), r.at("ingest"), "ingest");
  auto ingest_one = [&](const std::string& src, const std::string& name, const char* out) {
    json a = ingest_defaults();
    a["panel"] = src;
    a["score_name"] = name;
    apply_config(a, ing, "pipeline.ingest");
    a["out"] = at(out);
    run_ingest(a);
    return at(out);
  };
  const std::string panel = ingest_one(panel_src, score, "panel.csv");
  const std::string covariate = cov_src.empty() ? "" : ingest_one(cov_src, cov_name, "covariate.csv");
  const std::string events = events_src;

  json est = estimate_defaults();
  est["panel"] = panel;
  est["events"] = events;
  est["event_type"] = r.at("event_type");
  est["score_name"] = score;
  est["window"] = r.at("window");
  est["out_outcomes"] = at("outcomes.csv");
  est["out_stats"] = at("stats.json");
  run_estimate(est);

  if (const auto n = field<std::int64_t>(r, "placebo_episodes"); n > 0) {
    json pl = placebo_defaults(seed);
    pl["panel"] = panel;
    pl["score_name"] = score;
    pl["episodes"] = n;
    pl["window"] = r.at("window");
    pl["out"] = at("placebo.json");
    run_placebo(pl);
  }

  json feat = features_defaults();
  feat["panel"] = panel;
  feat["events"] = events;
  feat["event_type"] = r.at("event_type");
  feat["score_name"] = score;
  feat["window"] = r.at("window");
  feat["features"] = r.at("features");
  const std::string features = field<std::string>(r, "features");
  if (features.find("cov") != std::string::npos) {
    feat["covariate"] = covariate;
    feat["covariate_name"] = cov_name;
  }
  if (features.find("exog") != std::string::npos) feat["embeddings"] = emb_src;
  feat["out"] = at("dataset.csv");
  run_features(feat);

  const json model = merge_section(pipeline_defaults(0).at("model"), r.at("model"), "model");
  json tr = train_defaults(seed);
  tr["dataset"] = at("dataset.csv");
  tr["family"] = model.at("family");
  tr["hyperparameters"] = model.at("hyperparameters");
  tr["per_target"] = model.at("per_target");
  tr["split"] = r.at("split");
  tr["out"] = at("model.bin");
  run_train(tr);

  const json ev_cfg = merge_section(pipeline_defaults(0).at("evaluate"), r.at("evaluate"), "evaluate");
  json ev = evaluate_defaults();
  ev["model"] = at("model.bin");
  ev["dataset"] = at("dataset.csv");
  apply_config(ev, ev_cfg, "pipeline.evaluate");
  if (!field<std::string>(ev, "strata").empty()) {
    if (meta_src.empty()) usage_error("stratified evaluation needs region metadata");
    ev["meta"] = meta_src;
  }
  ev["split"] = r.at("split");
  ev["out"] = at("report.json");
  ev["predictions"] = at("predictions.csv");
  run_evaluate(ev);

  std::vector<std::string> outputs{at("report.json"), at("outcomes.csv"), at("stats.json"), at("dataset.csv"),
                                   at("model.bin"),   at("predictions.csv")};
  Manifest{"pipeline", r, {panel_src, events_src, meta_src, emb_src, cov_src}, seed, outputs}.write();
  return {{"report", at("report.json")}};
}

// ---- argument plumbing ----

struct Common {
  std::string config;
  int threads = 0;
  bool quiet = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON file whose keys override flags");
}

void add_input_flags(CLI::App* app, std::string& score, std::string& epoch) {
  app->add_option("--score-name", score, "Name of the panel score")->capture_default_str();
  app->add_option("--epoch-date", epoch, "Read week fields as ISO dates counted in weeks from this date's Monday");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Longitudinal discontinuity estimation and forecasting"};
  app.set_version_flag("--version", std::string(ruptura_version()));
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--threads", common.threads, "Cap on worker threads (0 = all cores)")->capture_default_str();
  app.add_flag("--quiet", common.quiet, "Suppress warnings");

  std::uint64_t seed = 0;
  std::optional<std::uint64_t> seed_flag;

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Load a panel, filter, transform and write it back");
  std::string in_panel, in_score = "score", in_epoch, in_out;
  std::int64_t in_min_users = 200;
  bool in_zscore = false;
  int in_lag = 0;
  ingest->add_option("--panel", in_panel, "Panel CSV")->required();
  add_input_flags(ingest, in_score, in_epoch);
  ingest->add_option("--min-users", in_min_users, "Drop observations with fewer users")->capture_default_str();
  ingest->add_flag("--zscore", in_zscore, "Z-score each region");
  ingest->add_option("--difference-lag", in_lag, "Difference at this lag, 0 = off (52 removes yearly seasonality)")
      ->capture_default_str();
  ingest->add_option("--out", in_out, "Output panel CSV")->required();
  add_common(ingest, common);

  // estimate
  auto* estimate = app.add_subcommand("estimate", "Estimate discontinuities around events");
  std::string es_panel, es_events, es_type = "first_case", es_score = "score", es_epoch, es_outcomes, es_stats;
  WindowFlags es_window;
  estimate->add_option("--panel", es_panel, "Panel CSV")->required();
  estimate->add_option("--events", es_events, "Events CSV")->required();
  estimate->add_option("--event", es_type, "Event type")->capture_default_str();
  add_input_flags(estimate, es_score, es_epoch);
  es_window.add(estimate);
  estimate->add_option("--out", es_outcomes, "Outcomes CSV")->required();
  estimate->add_option("--stats", es_stats, "Cohort stats JSON (default <out>.stats.json)");
  add_common(estimate, common);

  // placebo
  auto* placebo = app.add_subcommand("placebo", "Estimate at random event weeks");
  std::string pl_panel, pl_score = "score", pl_epoch, pl_out;
  std::int64_t pl_episodes = 5000;
  WindowFlags pl_window;
  placebo->add_option("--panel", pl_panel, "Panel CSV")->required();
  add_input_flags(placebo, pl_score, pl_epoch);
  placebo->add_option("--episodes", pl_episodes, "Number of placebo episodes")->capture_default_str();
  placebo->add_option("--seed", seed_flag, "Random seed (falls back to RUPTURA_SEED)");
  pl_window.add(placebo);
  placebo->add_option("--out", pl_out, "Summary JSON")->required();
  add_common(placebo, common);

  // features
  auto* features = app.add_subcommand("features", "Build a forecasting dataset");
  std::string fe_panel, fe_events, fe_type = "first_case", fe_cov, fe_cov_name = "covariate", fe_emb,
                                   fe_features = "P,RC", fe_score = "score", fe_epoch, fe_out, fe_layout;
  WindowFlags fe_window;
  features->add_option("--panel", fe_panel, "Panel CSV")->required();
  features->add_option("--events", fe_events, "Events CSV")->required();
  features->add_option("--event", fe_type, "Event type")->capture_default_str();
  features->add_option("--covariate", fe_cov, "Covariate panel CSV (needed for cov)");
  features->add_option("--covariate-name", fe_cov_name, "Name of the covariate score")->capture_default_str();
  features->add_option("--embeddings", fe_emb, "Embeddings CSV (needed for exog)");
  features->add_option("--features", fe_features, "Comma list of P, RC, cov, exog")->capture_default_str();
  add_input_flags(features, fe_score, fe_epoch);
  fe_window.add(features);
  features->add_option("--out", fe_out, "Dataset CSV")->required();
  features->add_option("--layout", fe_layout, "Layout JSON (default <out>.layout.json)");
  add_common(features, common);

  // train
  auto* train = app.add_subcommand("train", "Train a forecasting model on the train split");
  std::string tr_dataset, tr_layout, tr_family = "ridge", tr_out;
  bool tr_per_target = false;
  std::vector<double> tr_split{0.6, 0.2, 0.2};
  std::optional<std::uint64_t> tr_split_seed;
  train->add_option("--dataset", tr_dataset, "Dataset CSV")->required();
  train->add_option("--layout", tr_layout, "Layout JSON (default <dataset>.layout.json)");
  train->add_option("--family", tr_family,
                    "ridge, knn, random_forest, extra_trees, ffn, baseline_mean, baseline_no_change, "
                    "baseline_forecast")
      ->capture_default_str();
  const std::vector<std::pair<std::string, std::string>> hyper_flags = {
      {"alpha", "Ridge penalty"},
      {"k", "Neighbours for knn"},
      {"n_estimators", "Trees in a forest"},
      {"max_depth", "Tree depth, 0 = unlimited"},
      {"max_features", "Features tried per split, 0 = ceil(d/3)"},
      {"bootstrap", "Bootstrap samples per tree (0/1)"},
      {"epochs", "FFN epochs"},
      {"learning_rate", "FFN Adam step size"},
      {"hidden_layers", "FFN hidden layers"},
      {"width", "FFN hidden width"},
      {"batch_size", "FFN minibatch size"},
      {"max_order", "Largest AR order for the forecasting baseline"},
  };
  std::vector<std::optional<double>> hyper_values(hyper_flags.size());
  for (std::size_t i = 0; i < hyper_flags.size(); ++i) {
    std::string flag = "--" + hyper_flags[i].first;
    for (auto& c : flag)
      if (c == '_') c = '-';
    train->add_option(flag, hyper_values[i], hyper_flags[i].second);
  }
  train->add_flag("--per-target", tr_per_target, "Fit one model per target");
  train->add_option("--seed", seed_flag, "Random seed (falls back to RUPTURA_SEED)");
  train->add_option("--split", tr_split, "Train/dev/test ratios")->expected(3)->delimiter(',');
  train->add_option("--split-seed", tr_split_seed, "Seed of the region split (default: --seed)");
  train->add_option("--out", tr_out, "Model file (.json for JSON, otherwise binary)")->required();
  add_common(train, common);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score a model on held-out regions");
  std::string ev_model, ev_dataset, ev_layout, ev_baseline = "mean", ev_strata, ev_meta, ev_part = "test", ev_out,
                                               ev_predictions;
  std::vector<double> ev_thresholds, ev_split{0.6, 0.2, 0.2};
  int ev_bins = 3;
  std::optional<std::uint64_t> ev_split_seed;
  evaluate->add_option("--model", ev_model, "Model file")->required();
  evaluate->add_option("--dataset", ev_dataset, "Dataset CSV")->required();
  evaluate->add_option("--layout", ev_layout, "Layout JSON (default <dataset>.layout.json)");
  evaluate->add_option("--baseline", ev_baseline, "Baseline family for paired t-tests, or none")
      ->capture_default_str();
  evaluate->add_option("--strata", ev_strata, "Stratify by ses or urbanicity");
  evaluate->add_option("--meta", ev_meta, "Region metadata CSV (needed for strata)");
  evaluate->add_option("--n-bins", ev_bins, "Strata bins")->capture_default_str();
  evaluate->add_option("--strata-thresholds", ev_thresholds, "Ascending cut points replacing equal-count bins")
      ->delimiter(',');
  evaluate->add_option("--split", ev_split, "Train/dev/test ratios used in training")->expected(3)->delimiter(',');
  evaluate->add_option("--split-seed", ev_split_seed, "Seed of the region split (default: model seed)");
  evaluate->add_option("--part", ev_part, "test or dev")->capture_default_str();
  evaluate->add_option("--out", ev_out, "Report JSON")->required();
  evaluate->add_option("--predictions", ev_predictions, "Per-episode predictions CSV");
  add_common(evaluate, common);

  // did
  auto* did = app.add_subcommand("did", "Matched difference-in-differences for one region");
  std::string di_panel, di_events, di_meta, di_target, di_type = "first_case", di_score = "score", di_epoch, di_out;
  std::int64_t di_k = 5;
  WindowFlags di_window;
  did->add_option("--panel", di_panel, "Panel CSV")->required();
  did->add_option("--events", di_events, "Events CSV")->required();
  did->add_option("--meta", di_meta, "Region metadata CSV")->required();
  did->add_option("--target", di_target, "Target region id")->required();
  did->add_option("--event", di_type, "Event type")->capture_default_str();
  did->add_option("--k", di_k, "Matched controls")->capture_default_str();
  add_input_flags(did, di_score, di_epoch);
  di_window.add(did);
  did->add_option("--out", di_out, "Result JSON")->required();
  add_common(did, common);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort with known effects");
  std::string sy_out;
  std::optional<int> sy_regions;
  synth->add_option("--out-dir", sy_out, "Output directory")->required();
  synth->add_option("--seed", seed_flag, "Random seed (falls back to RUPTURA_SEED)");
  synth->add_option("--n-regions", sy_regions, "Number of regions");
  add_common(synth, common);

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "synth/ingest, estimate, features, train, evaluate");
  std::string pi_out, pi_features, pi_family;
  pipeline->add_option("--out-dir", pi_out, "Output directory");
  pipeline->add_option("--seed", seed_flag, "Random seed (falls back to RUPTURA_SEED)");
  pipeline->add_option("--features", pi_features, "Comma list of P, RC, cov, exog");
  pipeline->add_option("--family", pi_family, "Model family");
  add_common(pipeline, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  ruptura_set_threads(common.threads);
  ruptura_set_warnings(common.quiet ? 0 : 1);

  try {
    seed = seed_flag ? *seed_flag : default_seed();
    const json config = load_config(common.config);
    json r;
    json (*run)(const json&) = nullptr;
    const std::string where = app.get_subcommands().front()->get_name();

    if (ingest->parsed()) {
      r = {{"panel", in_panel},   {"score_name", in_score}, {"epoch_date", in_epoch}, {"min_users", in_min_users},
           {"zscore", in_zscore}, {"difference_lag", in_lag}, {"out", in_out}};
      run = run_ingest;
    } else if (estimate->parsed()) {
      r = {{"panel", es_panel},          {"events", es_events},
           {"event_type", es_type},      {"score_name", es_score},
           {"epoch_date", es_epoch},     {"window", es_window.to_json()},
           {"out_outcomes", es_outcomes}, {"out_stats", es_stats.empty() ? es_outcomes + ".stats.json" : es_stats}};
      run = run_estimate;
    } else if (placebo->parsed()) {
      r = {{"panel", pl_panel}, {"score_name", pl_score}, {"epoch_date", pl_epoch}, {"episodes", pl_episodes},
           {"seed", seed},      {"window", pl_window.to_json()}, {"out", pl_out}};
      run = run_placebo;
    } else if (features->parsed()) {
      r = {{"panel", fe_panel},     {"events", fe_events},   {"event_type", fe_type},
           {"covariate", fe_cov},   {"covariate_name", fe_cov_name},
           {"embeddings", fe_emb},  {"features", fe_features}, {"score_name", fe_score},
           {"epoch_date", fe_epoch}, {"window", fe_window.to_json()}, {"out", fe_out},
           {"out_layout", fe_layout}};
      run = run_features;
    } else if (train->parsed()) {
      json hyper = json::object();
      for (std::size_t i = 0; i < hyper_flags.size(); ++i)
        if (hyper_values[i]) hyper[hyper_flags[i].first] = *hyper_values[i];
      r = train_defaults(seed);
      r["dataset"] = tr_dataset;
      r["layout"] = tr_layout;
      r["family"] = tr_family;
      r["hyperparameters"] = hyper;
      r["per_target"] = tr_per_target;
      r["split"] = tr_split;
      if (tr_split_seed) r["split_seed"] = *tr_split_seed;
      r["out"] = tr_out;
      run = run_train;
    } else if (evaluate->parsed()) {
      r = evaluate_defaults();
      r["model"] = ev_model;
      r["dataset"] = ev_dataset;
      r["layout"] = ev_layout;
      r["baseline"] = ev_baseline;
      r["strata"] = ev_strata;
      r["meta"] = ev_meta;
      r["strata_thresholds"] = ev_thresholds;
      r["n_bins"] = ev_bins;
      r["split"] = ev_split;
      if (ev_split_seed) r["split_seed"] = *ev_split_seed;
      r["part"] = ev_part;
      r["out"] = ev_out;
      r["predictions"] = ev_predictions;
      run = run_evaluate;
    } else if (did->parsed()) {
      r = {{"panel", di_panel},   {"events", di_events},   {"meta", di_meta},
           {"target", di_target}, {"event_type", di_type}, {"k", di_k},
           {"score_name", di_score}, {"epoch_date", di_epoch}, {"window", di_window.to_json()},
           {"out", di_out}};
      run = run_did;
    } else if (synth->parsed()) {
      // The synth config file is the generator config itself.
      json sc = {{"seed", seed}};
      if (sy_regions) sc["n_regions"] = *sy_regions;
      for (const auto& [key, value] : config.items()) sc[key] = value;
      run_synth(sc, sy_out);
      return 0;
    } else if (pipeline->parsed()) {
      r = pipeline_defaults(seed);
      if (!pi_out.empty()) r["out_dir"] = pi_out;
      if (!pi_features.empty()) r["features"] = pi_features;
      if (!pi_family.empty()) r["model"]["family"] = pi_family;
      apply_config(r, config, where);
      run_pipeline(r);
      return 0;
    }
    apply_config(r, config, where);
    run(r);
  } catch (const CliError& e) {
    std::cerr << json{{"error", e.status}, {"message", e.message}}.dump() << '\n';
    return e.exit_code;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
    return kExitDomain;
  }
  return 0;
}
