#ifndef RUPTURA_RUPTURA_H
#define RUPTURA_RUPTURA_H

#include <stddef.h>
#include <stdint.h>

#if defined(RUPTURA_BUILDING_LIBRARY)
#define RUPTURA_API __attribute__((visibility("default")))
#else
#define RUPTURA_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Every call returns a status; on failure ruptura_last_error() describes it.
 * Strings returned through char** are owned by the caller and released with
 * ruptura_string_free. Structured options are passed as JSON objects. */

typedef enum ruptura_status {
  RUPTURA_OK = 0,
  RUPTURA_E_IO = 1,
  RUPTURA_E_PARSE = 2,
  RUPTURA_E_VALIDATION = 3,
  RUPTURA_E_DIMENSION = 4,
  RUPTURA_E_INSUFFICIENT_DATA = 5,
  RUPTURA_E_DEGENERATE = 6,
  RUPTURA_E_LAYOUT = 7,
  RUPTURA_E_CONFIG = 8,
  RUPTURA_E_MISSING_EXOG = 9,
  RUPTURA_E_MISSING_COVARIATE = 10,
  RUPTURA_E_INVALID_ARGUMENT = 11,
  RUPTURA_E_INTERNAL = 99
} ruptura_status;

typedef struct ruptura_panel ruptura_panel;
typedef struct ruptura_events ruptura_events;
typedef struct ruptura_meta ruptura_meta;
typedef struct ruptura_embeddings ruptura_embeddings;
typedef struct ruptura_dataset ruptura_dataset;
typedef struct ruptura_model ruptura_model;

RUPTURA_API const char* ruptura_version(void);
/* Message of the last failed call on this thread, "" if none. */
RUPTURA_API const char* ruptura_last_error(void);
RUPTURA_API const char* ruptura_status_name(ruptura_status status);
RUPTURA_API void ruptura_string_free(char* s);

/* n <= 0 means hardware concurrency. */
RUPTURA_API void ruptura_set_threads(int n);
RUPTURA_API void ruptura_set_warnings(int enabled);

/* Hex FNV-1a digest of a file's bytes, for run manifests. */
RUPTURA_API ruptura_status ruptura_file_digest(const char* path, char** out_hex);

/* ---- panels and side tables ---- */

/* epoch_date may be NULL (integer week_index) or an ISO date. */
RUPTURA_API ruptura_status ruptura_panel_load(const char* path, const char* score_name,
                                              const char* epoch_date, ruptura_panel** out);
RUPTURA_API void ruptura_panel_free(ruptura_panel* panel);
RUPTURA_API ruptura_status ruptura_panel_save(const ruptura_panel* panel, const char* path);
RUPTURA_API size_t ruptura_panel_region_count(const ruptura_panel* panel);
RUPTURA_API size_t ruptura_panel_observation_count(const ruptura_panel* panel);
/* JSON array of transform log entries. */
RUPTURA_API ruptura_status ruptura_panel_transform_log(const ruptura_panel* panel, char** out_json);
RUPTURA_API ruptura_status ruptura_panel_filter_reliability(ruptura_panel* panel, int64_t min_users);
RUPTURA_API ruptura_status ruptura_panel_zscore(ruptura_panel* panel);
RUPTURA_API ruptura_status ruptura_panel_difference(ruptura_panel* panel, int lag);

RUPTURA_API ruptura_status ruptura_events_load(const char* path, const char* epoch_date,
                                               ruptura_events** out);
RUPTURA_API void ruptura_events_free(ruptura_events* events);
RUPTURA_API size_t ruptura_events_count(const ruptura_events* events);

RUPTURA_API ruptura_status ruptura_meta_load(const char* path, ruptura_meta** out);
RUPTURA_API void ruptura_meta_free(ruptura_meta* meta);

RUPTURA_API ruptura_status ruptura_embeddings_load(const char* path, ruptura_embeddings** out);
RUPTURA_API void ruptura_embeddings_free(ruptura_embeddings* embeddings);
RUPTURA_API size_t ruptura_embeddings_dimension(const ruptura_embeddings* embeddings);

/* ---- discontinuity estimation ---- */

/* window_json: {"half_width":9,"buffer":1,"min_points_per_segment":3}; any
 * key may be omitted, NULL uses defaults. */
RUPTURA_API ruptura_status ruptura_estimate(const ruptura_panel* panel, const ruptura_events* events,
                                            const char* event_type, const char* window_json,
                                            char** out_outcomes_csv, char** out_stats_json);

RUPTURA_API ruptura_status ruptura_placebo(const ruptura_panel* panel, size_t n_episodes,
                                           const char* window_json, uint64_t seed,
                                           char** out_summary_json);

/* ---- features ---- */

/* covariate and embeddings may be NULL. features is a list like "P,RC". */
RUPTURA_API ruptura_status ruptura_dataset_build(const ruptura_panel* panel,
                                                 const ruptura_events* events,
                                                 const char* event_type,
                                                 const ruptura_panel* covariate,
                                                 const ruptura_embeddings* embeddings,
                                                 const char* features, const char* window_json,
                                                 ruptura_dataset** out);
RUPTURA_API void ruptura_dataset_free(ruptura_dataset* dataset);
RUPTURA_API size_t ruptura_dataset_rows(const ruptura_dataset* dataset);
RUPTURA_API size_t ruptura_dataset_dimension(const ruptura_dataset* dataset);
RUPTURA_API ruptura_status ruptura_dataset_layout(const ruptura_dataset* dataset, char** out_json);
RUPTURA_API ruptura_status ruptura_dataset_save(const ruptura_dataset* dataset, const char* csv_path,
                                                const char* layout_path);
RUPTURA_API ruptura_status ruptura_dataset_load(const char* csv_path, const char* layout_path,
                                                ruptura_dataset** out);

typedef enum ruptura_split_part {
  RUPTURA_SPLIT_TRAIN = 0,
  RUPTURA_SPLIT_DEV = 1,
  RUPTURA_SPLIT_TEST = 2
} ruptura_split_part;

/* split_json: {"ratios":[0.6,0.2,0.2],"seed":42}. Rows are split by region. */
RUPTURA_API ruptura_status ruptura_dataset_split(const ruptura_dataset* dataset, const char* split_json,
                                                 ruptura_split_part part, ruptura_dataset** out);

/* ---- models ---- */

/* spec_json: {"family":"ridge","hyperparameters":{"alpha":1.0},"seed":42,
 * "per_target":false}. Checks family and hyperparameters only. */
RUPTURA_API ruptura_status ruptura_model_spec_validate(const char* spec_json);
RUPTURA_API ruptura_status ruptura_model_train(const ruptura_dataset* dataset, const char* spec_json,
                                               ruptura_model** out);
RUPTURA_API void ruptura_model_free(ruptura_model* model);
RUPTURA_API ruptura_status ruptura_model_save(const ruptura_model* model, const char* path);
RUPTURA_API ruptura_status ruptura_model_load(const char* path, ruptura_model** out);
/* {"family":..,"hyperparameters":..,"seed":..,"per_target":..,"layout":..} */
RUPTURA_API ruptura_status ruptura_model_describe(const ruptura_model* model, char** out_json);
/* Writes rows x 2 predictions, row-major, into out (capacity in doubles). */
RUPTURA_API ruptura_status ruptura_model_predict(const ruptura_model* model,
                                                 const ruptura_dataset* dataset, double* out,
                                                 size_t capacity);

/* ---- evaluation ---- */

/* Scores `model` on `test`. options_json keys:
 *   "baseline": family name trained on `train` for the paired t-test
 *   "strata": "ses" | "urbanicity" (requires meta)
 *   "n_bins": 3, "thresholds": [..]
 * out_predictions_csv may be NULL. */
RUPTURA_API ruptura_status ruptura_evaluate(const ruptura_model* model, const ruptura_dataset* train,
                                            const ruptura_dataset* test, const ruptura_meta* meta,
                                            const char* options_json, char** out_report_json,
                                            char** out_predictions_csv);

/* ---- difference in differences ---- */

/* options_json: {"event_type":"first_case","k":5,"window":{...}} */
RUPTURA_API ruptura_status ruptura_did(const ruptura_panel* panel, const ruptura_events* events,
                                       const ruptura_meta* meta, const char* target_region,
                                       const char* options_json, char** out_result_json);

/* ---- synthetic data ---- */

/* Generates a cohort from config_json and writes it into out_dir. Returns a
 * JSON array of written paths. */
RUPTURA_API ruptura_status ruptura_synth(const char* config_json, const char* out_dir,
                                         char** out_paths_json);
/* Fully resolved config with defaults filled in. */
RUPTURA_API ruptura_status ruptura_synth_resolve(const char* config_json, char** out_json);

#ifdef __cplusplus
}
#endif

#endif
