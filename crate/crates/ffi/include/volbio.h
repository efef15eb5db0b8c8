#ifndef VOLBIO_H
#define VOLBIO_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VolbioStatus {
  VOLBIO_STATUS_OK = 0,
  VOLBIO_STATUS_NULL_POINTER = 1,
  VOLBIO_STATUS_INVALID_INPUT = 2,
  VOLBIO_STATUS_FIT_ERROR = 3,
  VOLBIO_STATUS_STARVED = 4,
  VOLBIO_STATUS_MISSING_OPERAND = 5,
  VOLBIO_STATUS_PARSE_ERROR = 6,
  VOLBIO_STATUS_CONFIG_ERROR = 7,
  VOLBIO_STATUS_INVALID_UTF8 = 8,
} VolbioStatus;

typedef enum VolbioRhoStrategy {
  VOLBIO_RHO_STRATEGY_FIT_INCLUDING = 0,
  VOLBIO_RHO_STRATEGY_FIT_EXCLUDING = 1,
  VOLBIO_RHO_STRATEGY_WBD = 2,
  VOLBIO_RHO_STRATEGY_AVG_WBD_INCLUDING = 3,
  VOLBIO_RHO_STRATEGY_AVG_WBD_EXCLUDING = 4,
} VolbioRhoStrategy;

/**
 * Opaque plot dataset.
 */
typedef struct VolbioDataset VolbioDataset;

/**
 * Opaque volume-biomass equation.
 */
typedef struct VolbioEquation VolbioEquation;

typedef struct VolbioPowerFit {
  double a;
  double b;
  double cd;
  size_t n;
} VolbioPowerFit;

typedef struct VolbioSlopeFit {
  double rho;
  double cd;
  size_t n;
  /**
   * Plots excluded by the zone screen (0 for a plain fit).
   */
  size_t n_excluded;
} VolbioSlopeFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *volbio_last_error(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void volbio_string_free(char *s);

/**
 * Fits `y = a·x^b` in log space.
 *
 * # Safety
 * `xs` and `ys` must point to `n` doubles; `out` must be writable.
 */
enum VolbioStatus volbio_fit_power(const double *xs,
                                   const double *ys,
                                   size_t n,
                                   struct VolbioPowerFit *out);

/**
 * Direct regression of total biomass on volume.
 *
 * # Safety
 * As [`volbio_fit_power`].
 */
enum VolbioStatus volbio_fit_direct(const double *volume,
                                    const double *total,
                                    size_t n,
                                    struct VolbioPowerFit *out);

/**
 * Least-squares slope through the origin.
 *
 * # Safety
 * `volume` and `stem` must point to `n` doubles; `out` must be writable.
 */
enum VolbioStatus volbio_fit_slope_origin(const double *volume,
                                          const double *stem,
                                          size_t n,
                                          struct VolbioSlopeFit *out);

/**
 * # Safety
 * `observed` and `predicted` must point to `n` doubles; `out` must be writable.
 */
enum VolbioStatus volbio_coefficient_of_determination(const double *observed,
                                                      const double *predicted,
                                                      size_t n,
                                                      double *out);

/**
 * `100·(fitted − reference)/reference`.
 *
 * # Safety
 * `out` must be writable.
 */
enum VolbioStatus volbio_rho_error(double fitted, double reference, double *out);

/**
 * `B_s^(1−b)/a`.
 *
 * # Safety
 * `out` must be writable.
 */
enum VolbioStatus volbio_stem_ratio(double a, double b, double stem, double *out);

/**
 * Parses plot CSV bytes into a dataset. Bad rows are skipped; their count
 * is available from [`volbio_dataset_rejected_rows`].
 *
 * # Safety
 * `bytes` must point to `len` readable bytes; `out` must be writable.
 */
enum VolbioStatus volbio_dataset_parse_csv(const uint8_t *bytes,
                                           size_t len,
                                           struct VolbioDataset **out);

/**
 * Number of records; 0 for NULL.
 *
 * # Safety
 * `ds` must be NULL or a live handle.
 */
size_t volbio_dataset_len(const struct VolbioDataset *ds);

/**
 * # Safety
 * `ds` must be NULL or a live handle.
 */
size_t volbio_dataset_rejected_rows(const struct VolbioDataset *ds);

/**
 * Restricts a dataset to one species, returning a new handle.
 *
 * # Safety
 * `ds` must be a live handle, `species` a NUL-terminated string, `out` writable.
 */
enum VolbioStatus volbio_dataset_filter_species(const struct VolbioDataset *ds,
                                                const char *species,
                                                struct VolbioDataset **out);

/**
 * Refits both relationships with restricted-zone members removed.
 *
 * # Safety
 * `ds` must be a live handle; `power` and `slope` writable.
 */
enum VolbioStatus volbio_dataset_refit_excluding(const struct VolbioDataset *ds,
                                                 double max_wood_density,
                                                 double max_stem_fraction,
                                                 struct VolbioPowerFit *power,
                                                 struct VolbioSlopeFit *slope);

/**
 * # Safety
 * `ds` must be NULL or a handle not yet freed.
 */
void volbio_dataset_free(struct VolbioDataset *ds);

/**
 * Chooses ρ by `strategy` and recombines `a`, `b` into an equation.
 * Operands the strategy does not need may be NaN; a needed NaN operand
 * yields `MissingOperand`.
 *
 * # Safety
 * `species` must be a NUL-terminated string; `out` writable.
 */
enum VolbioStatus volbio_equation_new(double a,
                                      double b,
                                      enum VolbioRhoStrategy strategy,
                                      double rho_fit_including,
                                      double rho_fit_excluding,
                                      double wbd,
                                      const char *species,
                                      struct VolbioEquation **out);

/**
 * Loads an equation from its JSON form.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` writable.
 */
enum VolbioStatus volbio_equation_from_json(const char *json, struct VolbioEquation **out);

/**
 * NaN for NULL.
 *
 * # Safety
 * `eq` must be NULL or a live handle.
 */
double volbio_equation_alpha(const struct VolbioEquation *eq);

/**
 * NaN for NULL.
 *
 * # Safety
 * `eq` must be NULL or a live handle.
 */
double volbio_equation_beta(const struct VolbioEquation *eq);

/**
 * NaN for NULL.
 *
 * # Safety
 * `eq` must be NULL or a live handle.
 */
double volbio_equation_rho(const struct VolbioEquation *eq);

/**
 * Total biomass per hectare at `volume`.
 *
 * # Safety
 * `eq` must be a live handle; `out` writable.
 */
enum VolbioStatus volbio_equation_predict(const struct VolbioEquation *eq,
                                          double volume,
                                          double *out);

/**
 * Regional total `Σ area·α·V^β`, tonnes.
 *
 * # Safety
 * `eq` must be a live handle; `areas` and `volumes` must point to `n`
 * doubles; `out` writable.
 */
enum VolbioStatus volbio_equation_estimate_regional(const struct VolbioEquation *eq,
                                                    const double *areas,
                                                    const double *volumes,
                                                    size_t n,
                                                    double *out);

/**
 * Serializes an equation to JSON. Free the result with [`volbio_string_free`].
 *
 * # Safety
 * `eq` must be a live handle; `out` writable.
 */
enum VolbioStatus volbio_equation_to_json(const struct VolbioEquation *eq, char **out);

/**
 * # Safety
 * `eq` must be NULL or a handle not yet freed.
 */
void volbio_equation_free(struct VolbioEquation *eq);

/**
 * Runs the sampling experiment described by `request_json`
 * (`{"population": {...}, "noise": {...}, "experiment": {...}}`, the last
 * two optional) and returns the summary as JSON.
 *
 * # Safety
 * `request_json` must be a NUL-terminated string; `out` writable.
 */
enum VolbioStatus volbio_run_experiment_json(const char *request_json, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VOLBIO_H */
