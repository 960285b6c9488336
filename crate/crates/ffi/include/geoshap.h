#ifndef GEOSHAP_H
#define GEOSHAP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call. Values 2 to 7 match the CLI exit codes.
 */
typedef enum {
  GEOSHAP_STATUS_OK = 0,
  GEOSHAP_STATUS_CONFIG = 2,
  GEOSHAP_STATUS_DATA = 3,
  GEOSHAP_STATUS_MODEL = 4,
  GEOSHAP_STATUS_NUMERICAL = 5,
  GEOSHAP_STATUS_BRIDGE = 6,
  GEOSHAP_STATUS_IO = 7,
  GEOSHAP_STATUS_NULL_POINTER = 8,
  GEOSHAP_STATUS_PANIC = 9,
} GeoshapStatus;

/**
 * Tabular data with coordinates and an optional target.
 */
typedef struct GeoshapDataset GeoshapDataset;

/**
 * Attributions for every row of a dataset.
 */
typedef struct GeoshapExplanation GeoshapExplanation;

/**
 * A prediction oracle: a built-in trained model or a caller callback.
 */
typedef struct GeoshapModel GeoshapModel;

/**
 * Batch prediction callback. Fills `out` with `n_rows` values for the
 * row-major `rows` matrix and returns 0, or returns non-zero on failure.
 */
typedef int32_t (*GeoshapPredictFn)(void *user_data,
                                    const double *rows,
                                    size_t n_rows,
                                    size_t n_columns,
                                    double *out);

/**
 * Settings for `geoshap_explain`. Start from `geoshap_explain_options_default`.
 */
typedef struct {
  /**
   * Background rows sampled from the dataset.
   */
  size_t background_size;
  uint64_t background_seed;
  /**
   * Coalition budget; 0 picks the default.
   */
  size_t budget;
  uint64_t seed;
  /**
   * Treat the coordinates as one location player.
   */
  bool include_geo;
} GeoshapExplainOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next geoshap call on the same thread.
 */
const char *geoshap_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *geoshap_version(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void geoshap_string_free(char *s);

/**
 * Builds a dataset from `features` (`n_rows x n_features`), `coords`
 * (`n_rows x 2`) and an optional `target` of length `n_rows`. `names` may be
 * null, in which case features are called `x1..xp`.
 *
 * # Safety
 * Pointers must reference arrays of the stated sizes.
 */
GeoshapStatus geoshap_dataset_new(const double *features,
                                  size_t n_rows,
                                  size_t n_features,
                                  const double *coords,
                                  const double *target,
                                  const char *const *names,
                                  GeoshapDataset **out_dataset);

/**
 * Draws the synthetic spatially varying coefficient process with two
 * features on the unit square: `y = 3(u + v) + (1 + 2u) x1 + 2 x2 + noise`.
 */
GeoshapStatus geoshap_dataset_gen_svc(size_t n_rows,
                                      uint64_t seed,
                                      double noise_sd,
                                      GeoshapDataset **out_dataset);

/**
 * # Safety
 * `dataset` must be a live handle or null.
 */
size_t geoshap_dataset_n_rows(const GeoshapDataset *dataset);

/**
 * # Safety
 * `dataset` must be a live handle or null.
 */
size_t geoshap_dataset_n_features(const GeoshapDataset *dataset);

/**
 * # Safety
 * `dataset` must come from this library and not be freed twice.
 */
void geoshap_dataset_free(GeoshapDataset *dataset);

/**
 * Trains a built-in model on `dataset` (which must have a target).
 * `spec_json` selects the learner, for example `{"kind":"linear"}` or
 * `{"kind":"boosted_trees","trees":200,...}`; null means boosted trees with
 * default settings.
 *
 * # Safety
 * `dataset` must be a live handle; `spec_json` null or a C string.
 */
GeoshapStatus geoshap_model_train(const GeoshapDataset *dataset,
                                  const char *spec_json,
                                  GeoshapModel **out_model);

/**
 * Wraps a caller-supplied batch predictor over `n_columns` inputs.
 * `user_data` is passed back untouched and must outlive the handle.
 */
GeoshapStatus geoshap_model_from_callback(size_t n_columns,
                                          GeoshapPredictFn predict,
                                          void *user_data,
                                          GeoshapModel **out_model);

/**
 * Loads a model artifact written by `geoshap_model_save` or the CLI.
 *
 * # Safety
 * `path` must be a C string.
 */
GeoshapStatus geoshap_model_load(const char *path, GeoshapModel **out_model);

/**
 * # Safety
 * `model` must be a live handle; `path` a C string.
 */
GeoshapStatus geoshap_model_save(const GeoshapModel *model, const char *path);

/**
 * Input width the model expects, or 0 for a null handle.
 *
 * # Safety
 * `model` must be a live handle or null.
 */
size_t geoshap_model_n_columns(const GeoshapModel *model);

/**
 * Predicts `n_rows` rows of width `n_columns` into `out_values`.
 *
 * # Safety
 * `rows` must hold `n_rows * n_columns` values and `out_values` `n_rows`.
 */
GeoshapStatus geoshap_model_predict(const GeoshapModel *model,
                                    const double *rows,
                                    size_t n_rows,
                                    size_t n_columns,
                                    double *out_values);

/**
 * # Safety
 * `model` must come from this library and not be freed twice.
 */
void geoshap_model_free(GeoshapModel *model);

GeoshapExplainOptions geoshap_explain_options_default(void);

/**
 * Explains every row of `dataset`. `options` may be null for defaults.
 *
 * # Safety
 * Handles must be live; `options` null or a valid struct.
 */
GeoshapStatus geoshap_explain(const GeoshapDataset *dataset,
                              const GeoshapModel *model,
                              const GeoshapExplainOptions *options,
                              GeoshapExplanation **out_explanation);

/**
 * # Safety
 * `explanation` must be a live handle or null.
 */
size_t geoshap_explanation_n_rows(const GeoshapExplanation *explanation);

/**
 * # Safety
 * `explanation` must be a live handle or null.
 */
size_t geoshap_explanation_n_features(const GeoshapExplanation *explanation);

/**
 * Copies row `row`'s components. `phi` and `phi_geo_x` receive one value
 * per feature; any out-pointer may be null to skip it.
 *
 * # Safety
 * Non-null arrays must hold `n_features` values.
 */
GeoshapStatus geoshap_explanation_row(const GeoshapExplanation *explanation,
                                      size_t row,
                                      double *out_phi0,
                                      double *out_phi_geo,
                                      double *out_phi,
                                      double *out_phi_geo_x,
                                      double *out_prediction);

/**
 * Largest per-row gap between the summed components and the prediction.
 *
 * # Safety
 * `explanation` must be a live handle.
 */
GeoshapStatus geoshap_explanation_max_efficiency_gap(const GeoshapExplanation *explanation,
                                                     double *out_gap);

/**
 * Serializes the explanations to the JSON document format used by the CLI.
 * Free the result with `geoshap_string_free`.
 *
 * # Safety
 * `explanation` must be a live handle.
 */
GeoshapStatus geoshap_explanation_to_json(const GeoshapExplanation *explanation, char **out_json);

/**
 * Local coefficients for `feature` from the automatic-bandwidth bisquare
 * smoother. `out_beta` and `out_intercept` receive one value per row (either
 * may be null); `out_bandwidth` receives the neighbor count used.
 *
 * # Safety
 * Non-null arrays must hold `n_rows` values.
 */
GeoshapStatus geoshap_svc(const GeoshapExplanation *explanation,
                          const char *feature,
                          double *out_beta,
                          double *out_intercept,
                          double *out_bandwidth);

/**
 * # Safety
 * `explanation` must come from this library and not be freed twice.
 */
void geoshap_explanation_free(GeoshapExplanation *explanation);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GEOSHAP_H */
