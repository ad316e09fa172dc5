#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "ruptura/ruptura.h"

using nlohmann::json;

namespace {

// Takes ownership of a string returned by the library.
std::string take(char* s) {
  std::string out = s ? s : "";
  ruptura_string_free(s);
  return out;
}

struct Cohort {
  std::filesystem::path dir;
  ruptura_panel* panel = nullptr;
  ruptura_events* events = nullptr;
  ruptura_meta* meta = nullptr;
  ruptura_embeddings* embeddings = nullptr;

  Cohort() {
    std::random_device rd;
    dir = std::filesystem::temp_directory_path() / ("ruptura_capi_" + std::to_string(rd()));
    const char* config =
        R"({"n_regions":80,"noise_sigma":0.2,"seed":5,"embedding_dim":6,
            "effect_map":{"kind":"linear_in_history","delta0":0.5,"weights0":[0.3,1.0]}})";
    char* paths = nullptr;
    REQUIRE(ruptura_synth(config, dir.c_str(), &paths) == RUPTURA_OK);
    CHECK(json::parse(take(paths)).size() == 5);
    REQUIRE(ruptura_panel_load((dir / "panel.csv").c_str(), "anxiety", nullptr, &panel) == RUPTURA_OK);
    REQUIRE(ruptura_events_load((dir / "events.csv").c_str(), nullptr, &events) == RUPTURA_OK);
    REQUIRE(ruptura_meta_load((dir / "meta.csv").c_str(), &meta) == RUPTURA_OK);
    REQUIRE(ruptura_embeddings_load((dir / "embeddings.csv").c_str(), &embeddings) == RUPTURA_OK);
  }
  ~Cohort() {
    ruptura_panel_free(panel);
    ruptura_events_free(events);
    ruptura_meta_free(meta);
    ruptura_embeddings_free(embeddings);
    std::error_code ec;
    std::filesystem::remove_all(dir, ec);
  }

  ruptura_dataset* dataset(const char* features) const {
    ruptura_dataset* ds = nullptr;
    REQUIRE(ruptura_dataset_build(panel, events, "first_case", nullptr, embeddings, features, nullptr, &ds) ==
            RUPTURA_OK);
    return ds;
  }
};

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::strlen(ruptura_version()) > 0);
  CHECK(std::string(ruptura_status_name(RUPTURA_OK)) == "ok");
  CHECK(std::string(ruptura_status_name(RUPTURA_E_CONFIG)) == "config");
  CHECK(std::string(ruptura_status_name(static_cast<ruptura_status>(42))) == "unknown");
}

TEST_CASE("missing files report an io error with a message") {
  ruptura_panel* p = nullptr;
  CHECK(ruptura_panel_load("/nonexistent/panel.csv", "s", nullptr, &p) == RUPTURA_E_IO);
  CHECK(p == nullptr);
  CHECK(std::string(ruptura_last_error()).find("panel.csv") != std::string::npos);
}

TEST_CASE("null arguments are rejected, not dereferenced") {
  CHECK(ruptura_panel_load(nullptr, "s", nullptr, nullptr) == RUPTURA_E_INVALID_ARGUMENT);
  CHECK(ruptura_model_spec_validate(nullptr) == RUPTURA_E_CONFIG);  // empty spec has no family
  ruptura_panel_free(nullptr);
  ruptura_model_free(nullptr);
}

TEST_CASE("spec validation maps to config errors") {
  CHECK(ruptura_model_spec_validate(R"({"family":"ridge","hyperparameters":{"alpha":1}})") == RUPTURA_OK);
  CHECK(ruptura_model_spec_validate(R"({"family":"ridge","hyperparameters":{"alpha":-1}})") == RUPTURA_E_CONFIG);
  CHECK(std::string(ruptura_last_error()).find("alpha") != std::string::npos);
  CHECK(ruptura_model_spec_validate(R"({"family":"lasso"})") == RUPTURA_E_CONFIG);
  CHECK(ruptura_model_spec_validate(R"({"family":"knn","colour":1})") == RUPTURA_E_CONFIG);
  CHECK(ruptura_model_spec_validate("{not json") == RUPTURA_E_CONFIG);
}

TEST_CASE("panel transforms through handles") {
  Cohort c;
  const auto regions = ruptura_panel_region_count(c.panel);
  const auto before = ruptura_panel_observation_count(c.panel);
  CHECK(regions == 80);
  CHECK(ruptura_panel_filter_reliability(c.panel, 1000) == RUPTURA_OK);
  CHECK(ruptura_panel_observation_count(c.panel) < before);
  CHECK(ruptura_panel_zscore(c.panel) == RUPTURA_OK);
  CHECK(ruptura_panel_difference(c.panel, 1) == RUPTURA_OK);
  CHECK(ruptura_panel_difference(c.panel, 0) == RUPTURA_E_INVALID_ARGUMENT);
  char* log = nullptr;
  REQUIRE(ruptura_panel_transform_log(c.panel, &log) == RUPTURA_OK);
  const auto j = json::parse(take(log));
  REQUIRE(j.size() == 3);
  CHECK(j[0] == "filter_reliability(min_users=1000)");
  CHECK(j[2] == "difference(lag=1)");
}

TEST_CASE("estimate returns outcomes and cohort stats") {
  Cohort c;
  char* csv = nullptr;
  char* stats = nullptr;
  REQUIRE(ruptura_estimate(c.panel, c.events, "first_case", R"({"half_width":9})", &csv, &stats) == RUPTURA_OK);
  const auto text = take(csv);
  CHECK(text.rfind("region_id,event_type,", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 81);
  const auto s = json::parse(take(stats));
  CHECK(s["stats"].contains("delta0"));
  CHECK(s["n_outcomes"] == 80);
  CHECK(ruptura_estimate(c.panel, c.events, "first_case", R"({"halfwidth":9})", &csv, &stats) == RUPTURA_E_CONFIG);
  CHECK(ruptura_estimate(c.panel, c.events, "first_case", R"({"half_width":0})", &csv, &stats) != RUPTURA_OK);
}

TEST_CASE("placebo is seeded") {
  Cohort c;
  char* a = nullptr;
  char* b = nullptr;
  REQUIRE(ruptura_placebo(c.panel, 200, nullptr, 3, &a) == RUPTURA_OK);
  REQUIRE(ruptura_placebo(c.panel, 200, nullptr, 3, &b) == RUPTURA_OK);
  const auto ja = json::parse(take(a));
  CHECK(ja == json::parse(take(b)));
  CHECK(ja["n_episodes"] == 200);
}

TEST_CASE("dataset, split, train, predict and reload") {
  Cohort c;
  ruptura_dataset* ds = c.dataset("P,RC");
  CHECK(ruptura_dataset_dimension(ds) == 11);
  const auto n = ruptura_dataset_rows(ds);
  CHECK(n > 60);

  ruptura_dataset* train = nullptr;
  ruptura_dataset* test = nullptr;
  const char* split = R"({"ratios":[0.6,0.2,0.2],"seed":1})";
  REQUIRE(ruptura_dataset_split(ds, split, RUPTURA_SPLIT_TRAIN, &train) == RUPTURA_OK);
  REQUIRE(ruptura_dataset_split(ds, split, RUPTURA_SPLIT_TEST, &test) == RUPTURA_OK);
  CHECK(ruptura_dataset_rows(train) + ruptura_dataset_rows(test) < n);

  ruptura_model* model = nullptr;
  REQUIRE(ruptura_model_train(train, R"({"family":"ridge","hyperparameters":{"alpha":1},"seed":9})", &model) ==
          RUPTURA_OK);
  const auto rows = ruptura_dataset_rows(test);
  std::vector<double> pred(2 * rows), again(2 * rows);
  REQUIRE(ruptura_model_predict(model, test, pred.data(), pred.size()) == RUPTURA_OK);
  CHECK(ruptura_model_predict(model, test, pred.data(), 1) == RUPTURA_E_INVALID_ARGUMENT);

  const auto path = (c.dir / "model.bin").string();
  REQUIRE(ruptura_model_save(model, path.c_str()) == RUPTURA_OK);
  ruptura_model* back = nullptr;
  REQUIRE(ruptura_model_load(path.c_str(), &back) == RUPTURA_OK);
  REQUIRE(ruptura_model_predict(back, test, again.data(), again.size()) == RUPTURA_OK);
  CHECK(pred == again);
  char* desc = nullptr;
  REQUIRE(ruptura_model_describe(back, &desc) == RUPTURA_OK);
  const auto d = json::parse(take(desc));
  CHECK(d["family"] == "ridge");
  CHECK(d["seed"] == 9);

  // the dataset files round-trip too
  const auto csv = (c.dir / "d.csv").string(), layout = (c.dir / "d.layout.json").string();
  REQUIRE(ruptura_dataset_save(test, csv.c_str(), layout.c_str()) == RUPTURA_OK);
  ruptura_dataset* loaded = nullptr;
  REQUIRE(ruptura_dataset_load(csv.c_str(), layout.c_str(), &loaded) == RUPTURA_OK);
  REQUIRE(ruptura_model_predict(model, loaded, again.data(), again.size()) == RUPTURA_OK);
  for (std::size_t i = 0; i < pred.size(); ++i) CHECK(again[i] == doctest::Approx(pred[i]).epsilon(1e-12));

  // a dataset with another layout is refused
  ruptura_dataset* other = c.dataset("RC");
  std::vector<double> buf(2 * ruptura_dataset_rows(other));
  CHECK(ruptura_model_predict(model, other, buf.data(), buf.size()) == RUPTURA_E_LAYOUT);

  char* report = nullptr;
  char* preds = nullptr;
  REQUIRE(ruptura_evaluate(model, train, test, c.meta, R"({"baseline":"baseline_mean","strata":"ses"})", &report,
                           &preds) == RUPTURA_OK);
  const auto r = json::parse(take(report));
  CHECK(r["n_test"] == rows);
  CHECK(r.contains("vs_baseline"));
  CHECK(r["strata"].size() == 3);
  const auto ptext = take(preds);
  CHECK(ptext.rfind("region_id,event_type,delta0,delta1,pred_delta0,pred_delta1,baseline_delta0", 0) == 0);
  CHECK(ruptura_evaluate(model, train, test, nullptr, R"({"strata":"ses"})", &report, nullptr) != RUPTURA_OK);

  for (auto* x : {ds, train, test, loaded, other}) ruptura_dataset_free(x);
  ruptura_model_free(model);
  ruptura_model_free(back);
}

TEST_CASE("exog features require embeddings") {
  Cohort c;
  ruptura_dataset* ds = nullptr;
  CHECK(ruptura_dataset_build(c.panel, c.events, "first_case", nullptr, nullptr, "exog", nullptr, &ds) ==
        RUPTURA_E_MISSING_EXOG);
  CHECK(ruptura_dataset_build(c.panel, c.events, "first_case", nullptr, nullptr, "cov", nullptr, &ds) ==
        RUPTURA_E_MISSING_COVARIATE);
  ruptura_dataset* ok = c.dataset("exog,P,RC");
  CHECK(ruptura_dataset_dimension(ok) == 17);
  ruptura_dataset_free(ok);
}

TEST_CASE("did through the C API") {
  Cohort c;
  char* out = nullptr;
  REQUIRE(ruptura_did(c.panel, c.events, c.meta, "10001", R"({"event_type":"first_case","k":3})", &out) ==
          RUPTURA_OK);
  const auto j = json::parse(take(out));
  CHECK(j["matched_regions"].size() == 3);
  CHECK(j["did"].get<double>() ==
        doctest::Approx(j["observed"].get<double>() - j["counterfactual"].get<double>()));
}

TEST_CASE("synth config resolution fills defaults") {
  char* out = nullptr;
  REQUIRE(ruptura_synth_resolve(R"({"n_regions":7})", &out) == RUPTURA_OK);
  const auto j = json::parse(take(out));
  CHECK(j["n_regions"] == 7);
  CHECK(j.contains("noise_sigma"));
  CHECK(ruptura_synth_resolve(R"({"n_regions":0})", &out) == RUPTURA_E_CONFIG);
}

TEST_CASE("file digests are stable hex strings") {
  Cohort c;
  char* a = nullptr;
  char* b = nullptr;
  REQUIRE(ruptura_file_digest((c.dir / "panel.csv").c_str(), &a) == RUPTURA_OK);
  REQUIRE(ruptura_file_digest((c.dir / "panel.csv").c_str(), &b) == RUPTURA_OK);
  const auto ha = take(a);
  CHECK(ha == take(b));
  CHECK(ha.size() == 16);
  CHECK(ruptura_file_digest("/nonexistent", &a) == RUPTURA_E_IO);
}
