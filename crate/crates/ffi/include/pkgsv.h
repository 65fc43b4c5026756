#ifndef PKGSV_H
#define PKGSV_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/*
 Result code of every fallible call.
 */
typedef enum PkgsvStatus {
  PKGSV_STATUS_OK = 0,
  PKGSV_STATUS_NULL_POINTER = 1,
  PKGSV_STATUS_INVALID_ARGUMENT = 2,
  PKGSV_STATUS_DIMENSION_MISMATCH = 3,
  PKGSV_STATUS_NUMERICAL = 4,
  PKGSV_STATUS_PARSE = 5,
  PKGSV_STATUS_IO = 6,
  PKGSV_STATUS_OUT_OF_RANGE = 7,
  PKGSV_STATUS_PANIC = 8,
} PkgsvStatus;

/*
 Engine selection for [`pkgsv_sv_run`].
 */
typedef enum PkgsvEngine {
  /*
   Use the engine named in the configuration.
   */
  PKGSV_ENGINE_CONFIGURED = 0,
  PKGSV_ENGINE_SIMULATION = 1,
  PKGSV_ENGINE_ANALYTIC = 2,
} PkgsvEngine;

/*
 A parsed and validated run configuration.
 */
typedef struct PkgsvConfig PkgsvConfig;

/*
 A Shapley-value report.
 */
typedef struct PkgsvReport PkgsvReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *pkgsv_version(void);

/*
 Message of the last failed call on this thread, or null.

 The pointer stays valid until the next call into the library on the same thread.
 */
const char *pkgsv_last_error_message(void);

/*
 Loads a configuration file; relative paths inside it resolve against its directory.

 # Safety
 `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PkgsvStatus pkgsv_config_load(const char *path, struct PkgsvConfig **out);

/*
 Parses a configuration document; `base_dir` (may be null) anchors relative paths.

 # Safety
 `json` and a non-null `base_dir` must be NUL-terminated strings; `out` must be valid.
 */
enum PkgsvStatus pkgsv_config_from_json(const char *json,
                                        const char *base_dir,
                                        struct PkgsvConfig **out);

/*
 Seed of a configuration.

 # Safety
 `config` must come from this library and `seed` must be valid.
 */
enum PkgsvStatus pkgsv_config_seed(const struct PkgsvConfig *config, uint64_t *seed);

/*
 # Safety
 `config` must be null or come from this library, and must not be used afterwards.
 */
void pkgsv_config_free(struct PkgsvConfig *config);

/*
 Runs the configured Shapley analysis.

 `posterior` may be null to use the configured ensemble (or the nominal
 model); `threads = 0` uses the default pool. Results do not depend on
 the thread count.

 # Safety
 `config` must come from this library, a non-null `posterior` must be a
 NUL-terminated string and `out` must be valid.
 */
enum PkgsvStatus pkgsv_sv_run(const struct PkgsvConfig *config,
                              enum PkgsvEngine engine,
                              bool exact,
                              const char *posterior,
                              size_t threads,
                              struct PkgsvReport **out);

/*
 Number of inputs (rows) of a report; 0 for a null handle.

 # Safety
 `report` must be null or come from this library.
 */
size_t pkgsv_report_num_inputs(const struct PkgsvReport *report);

/*
 Number of outputs (columns) of a report; 0 for a null handle.

 # Safety
 `report` must be null or come from this library.
 */
size_t pkgsv_report_num_outputs(const struct PkgsvReport *report);

/*
 Label of an input, owned by the report; null when out of range.

 # Safety
 `report` must be null or come from this library.
 */
const char *pkgsv_report_input_label(const struct PkgsvReport *report, size_t input);

/*
 Label of an output, owned by the report; null when out of range.

 # Safety
 `report` must be null or come from this library.
 */
const char *pkgsv_report_output_label(const struct PkgsvReport *report, size_t output);

/*
 Shapley value and its Monte Carlo variance for one `(input, output)` pair.

 Either of `value` and `variance` may be null.

 # Safety
 `report` must come from this library; non-null outputs must be valid.
 */
enum PkgsvStatus pkgsv_report_value(const struct PkgsvReport *report,
                                    size_t input,
                                    size_t output,
                                    double *value,
                                    double *variance);

/*
 Writes the report as long-format CSV, or one row per input when `wide` is set.

 # Safety
 `report` must come from this library and `path` must be a NUL-terminated string.
 */
enum PkgsvStatus pkgsv_report_write_csv(const struct PkgsvReport *report,
                                        const char *path,
                                        bool wide);

/*
 Writes the full report as JSON.

 # Safety
 `report` must come from this library and `path` must be a NUL-terminated string.
 */
enum PkgsvStatus pkgsv_report_write_json(const struct PkgsvReport *report, const char *path);

/*
 # Safety
 `report` must be null or come from this library, and must not be used afterwards.
 */
void pkgsv_report_free(struct PkgsvReport *report);

/*
 Permutations needed for error `epsilon` with probability `1 - delta`, given a variance bound.

 # Safety
 `out` must be a valid pointer.
 */
enum PkgsvStatus pkgsv_sample_size_variance(double variance,
                                            double delta,
                                            double epsilon,
                                            uint64_t *out);

/*
 Permutations needed for error `epsilon` with probability `1 - delta`, given a range bound.

 # Safety
 `out` must be a valid pointer.
 */
enum PkgsvStatus pkgsv_sample_size_range(double range, double delta, double epsilon, uint64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PKGSV_H */
