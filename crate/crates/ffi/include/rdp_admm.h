#ifndef RDP_ADMM_H
#define RDP_ADMM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RdpStatus {
  RDP_STATUS_OK = 0,
  RDP_STATUS_NULL_POINTER = 1,
  RDP_STATUS_INVALID_ARGUMENT = 2,
  // No noise level within the search range meets the budget.
  RDP_STATUS_INFEASIBLE = 3,
  // An iterate became NaN or infinite.
  RDP_STATUS_NON_FINITE = 4,
  // The run had no noise, so there is no privacy guarantee to report.
  RDP_STATUS_NOT_PRIVATE = 5,
  RDP_STATUS_BUFFER_TOO_SMALL = 6,
  RDP_STATUS_IO = 7,
  RDP_STATUS_PANIC = 99,
} RdpStatus;

typedef enum RdpAlgorithm {
  RDP_ALGORITHM_SS_ADMM = 0,
  RDP_ALGORITHM_MP_ADMM = 1,
  RDP_ALGORITHM_DP_SGD = 2,
} RdpAlgorithm;

typedef enum RdpLoss {
  RDP_LOSS_LOGISTIC = 0,
  RDP_LOSS_HUBER_HINGE = 1,
} RdpLoss;

typedef enum RdpSchedule {
  RDP_SCHEDULE_CONSTANT = 0,
  RDP_SCHEDULE_INVERSE_EPOCH = 1,
  RDP_SCHEDULE_INVERSE_SQRT = 2,
} RdpSchedule;

// Opaque dataset handle.
typedef struct RdpDataset RdpDataset;

// Opaque run report handle.
typedef struct RdpReport RdpReport;

// Training options. Fill with `rdp_train_options_default` first.
typedef struct RdpTrainOptions {
  enum RdpAlgorithm algorithm;
  enum RdpLoss loss;
  double huber_h;
  double lambda;
  double sigma;
  // When positive, sigma is calibrated to this epsilon at `delta`.
  double target_epsilon;
  double delta;
  double clip;
  double rho;
  // Base step size (the constant step for mpADMM).
  double eta0;
  enum RdpSchedule schedule;
  // 0 selects ceil(sqrt(n)).
  size_t batch_size;
  // Iterations, or epochs for mpADMM.
  size_t steps;
  uint64_t seed;
} RdpTrainOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. Valid until
// the next call into this library on the same thread.
const char *rdp_last_error(void);

// Library version as a static NUL-terminated string.
const char *rdp_version(void);

// Copies `n` rows of `dim` features (row-major) and `n` labels in
// `{-1, +1}` or `{0, 1}`. With `scale` nonzero the data is min-max scaled,
// given an intercept when `intercept` is nonzero, and capped at unit norm.
//
// # Safety
// `features` must point to `n * dim` doubles and `labels` to `n` doubles.
enum RdpStatus rdp_dataset_new(const double *features,
                               const double *labels,
                               size_t n,
                               size_t dim,
                               int32_t scale,
                               int32_t intercept,
                               struct RdpDataset **out);

// Generates the correlated-Gaussian logistic dataset and preprocesses it
// with an intercept.
//
// # Safety
// `out` must be a valid pointer.
enum RdpStatus rdp_dataset_synthetic(size_t n,
                                     size_t dim,
                                     double ar,
                                     uint64_t seed,
                                     struct RdpDataset **out);

// # Safety
// `data` must be NULL or a handle from this library.
size_t rdp_dataset_len(const struct RdpDataset *data);

// Number of features, including an appended intercept.
//
// # Safety
// `data` must be NULL or a handle from this library.
size_t rdp_dataset_dim(const struct RdpDataset *data);

// # Safety
// `data` must be NULL or a handle from this library not freed before.
void rdp_dataset_free(struct RdpDataset *data);

// Defaults for `algorithm`.
//
// # Safety
// `out` must be a valid pointer.
enum RdpStatus rdp_train_options_default(enum RdpAlgorithm algorithm, struct RdpTrainOptions *out);

// Trains on `data` and returns a report handle in `out`.
//
// # Safety
// `data` and `options` must be valid; `out` must be a valid pointer.
enum RdpStatus rdp_train(const struct RdpDataset *data,
                         const struct RdpTrainOptions *options,
                         struct RdpReport **out);

// Length of the trained model vector.
//
// # Safety
// `report` must be NULL or a handle from this library.
size_t rdp_report_model_len(const struct RdpReport *report);

// Copies the model into `buf`, which holds `len` doubles.
//
// # Safety
// `buf` must point to `len` writable doubles.
enum RdpStatus rdp_report_model(const struct RdpReport *report, double *buf, size_t len);

// Accounted `(epsilon, delta)` and the order that attains it. Returns
// `NotPrivate` for a noiseless run.
//
// # Safety
// Output pointers must be valid or NULL.
enum RdpStatus rdp_report_privacy(const struct RdpReport *report,
                                  double *epsilon,
                                  double *delta,
                                  double *alpha);

// Noise level the run used (after any calibration).
//
// # Safety
// `report` must be NULL or a handle from this library.
double rdp_report_sigma(const struct RdpReport *report);

// Classification accuracy of the report's model on `data`.
//
// # Safety
// Handles must be valid; `out` must be a valid pointer.
enum RdpStatus rdp_report_accuracy(const struct RdpReport *report,
                                   const struct RdpDataset *data,
                                   double *out);

// The report as a JSON string; free it with `rdp_string_free`.
//
// # Safety
// `out` must be a valid pointer.
enum RdpStatus rdp_report_to_json(const struct RdpReport *report, char **out);

// # Safety
// `s` must be NULL or a string returned by this library.
void rdp_string_free(char *s);

// # Safety
// `report` must be NULL or a handle from this library not freed before.
void rdp_report_free(struct RdpReport *report);

// RDP of one Gaussian release at each of the `len` orders in `alphas`.
//
// # Safety
// `alphas` and `out` must each hold `len` doubles.
enum RdpStatus rdp_gaussian_rdp(double sensitivity,
                                double sigma,
                                const double *alphas,
                                size_t len,
                                double *out);

// RDP of one Gaussian release on a subsample drawn without replacement at
// ratio `q`. Orders must be integers when `q < 1`.
//
// # Safety
// `alphas` and `out` must each hold `len` doubles.
enum RdpStatus rdp_subsampled_gaussian_rdp(double sensitivity,
                                           double sigma,
                                           double q,
                                           const double *alphas,
                                           size_t len,
                                           double *out);

// Cheapest `(epsilon, delta)` for the curve given by `len` pairs.
//
// # Safety
// `alphas` and `epsilons` must hold `len` doubles; outputs valid or NULL.
enum RdpStatus rdp_to_approx_dp(const double *alphas,
                                const double *epsilons,
                                size_t len,
                                double delta,
                                double *epsilon_out,
                                double *alpha_out);

// Smallest sigma for which `iterations` subsampled Gaussian releases
// meet `(epsilon, delta)` on the default order grid.
//
// # Safety
// `sigma_out` must be a valid pointer.
enum RdpStatus rdp_calibrate_sigma(double epsilon,
                                   double delta,
                                   size_t iterations,
                                   double q,
                                   double sensitivity,
                                   double *sigma_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RDP_ADMM_H */
