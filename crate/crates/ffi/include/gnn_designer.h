#ifndef GNN_DESIGNER_H
#define GNN_DESIGNER_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Number of graph properties written by `gd_properties_compute`.
 */
#define GD_NUM_PROPERTIES 16

#define GD_ER_BEST 0

#define GD_ER_MEAN 1

typedef enum {
  GD_STATUS_OK = 0,
  GD_STATUS_NULL_POINTER = 1,
  GD_STATUS_INVALID_UTF8 = 2,
  GD_STATUS_INVALID_INPUT = 3,
  GD_STATUS_IO = 4,
  GD_STATUS_PARSE = 5,
  GD_STATUS_NOT_FOUND = 6,
  GD_STATUS_LEAKAGE = 7,
  GD_STATUS_BACKEND = 8,
  GD_STATUS_PANIC = 9,
} GdStatus;

/**
 * A loaded benchmark table.
 */
typedef struct GdBench GdBench;

/**
 * A loaded graph dataset.
 */
typedef struct GdDataset GdDataset;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * The last error message on this thread, or NULL. Valid until the next call on this thread.
 */
const char *gd_last_error(void);

/**
 * Frees a string returned by this library. NULL is ignored.
 */
void gd_string_free(char *s);

/**
 * Canonical name of property `index` (0..16), or NULL. The string is static.
 */
const char *gd_property_name(size_t index);

/**
 * Tie-corrected Kendall correlation of two score lists of length `n`. NaN when either list
 * is constant.
 */
GdStatus gd_kendall_tau(const double *a, const double *b, size_t n, double *out);

/**
 * Validates an architecture key and writes its canonical form to `canonical`.
 */
GdStatus gd_architecture_validate(const char *key, char **canonical);

/**
 * Loads a dataset directory.
 */
GdStatus gd_dataset_load(const char *dir, GdDataset **out);

void gd_dataset_free(GdDataset *d);

size_t gd_dataset_num_nodes(const GdDataset *d);

/**
 * Computes the 16 properties into `out` (canonical order, NaN where undefined).
 */
GdStatus gd_properties_compute(const GdDataset *d,
                               size_t max_nodes,
                               size_t pair_samples,
                               uint64_t seed,
                               double *out);

/**
 * Loads a benchmark CSV and, when `props_dir` is not NULL, its property directory.
 */
GdStatus gd_bench_load(const char *csv, const char *props_dir, GdBench **out);

void gd_bench_free(GdBench *b);

size_t gd_bench_num_records(const GdBench *b);

/**
 * Builds the confidence table and writes it as JSON. `er_mode` is `GD_ER_BEST` or
 * `GD_ER_MEAN`.
 */
GdStatus gd_confidence_build(const GdBench *b, size_t n_f, size_t n_m, int er_mode, char **json);

/**
 * Runs the pipeline. `config_json` is a pipeline config object and must name a
 * `leave_one_out` dataset. The report bundle goes to `out_dir` unless it is NULL. The run
 * summary is written to `summary_json`.
 */
GdStatus gd_design_run(const GdBench *b,
                       const char *config_json,
                       const char *out_dir,
                       char **summary_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GNN_DESIGNER_H */
