#ifndef SODM_H
#define SODM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum SodmStatus {
  SODM_STATUS_OK = 0,
  SODM_STATUS_NULL_POINTER = 1,
  SODM_STATUS_INVALID_ARGUMENT = 2,
  SODM_STATUS_IO = 3,
  SODM_STATUS_PARSE = 4,
  SODM_STATUS_UNSUPPORTED = 5,
  SODM_STATUS_INTERNAL = 6,
} SodmStatus;

typedef enum SodmKernel {
  SODM_KERNEL_LINEAR = 0,
  SODM_KERNEL_RBF = 1,
} SodmKernel;

/*
 Opaque dataset handle.
 */
typedef struct SodmDataset SodmDataset;

/*
 Opaque model handle.
 */
typedef struct SodmModel SodmModel;

/*
 Hyperparameters and hierarchical training settings.
 */
typedef struct SodmTrainConfig {
  enum SodmKernel kernel;
  /*
   RBF width; ignored by the linear kernel.
   */
  double gamma;
  double lambda;
  double theta;
  double nu;
  uintptr_t p;
  uintptr_t levels;
  /*
   0 picks min(32, ceil(sqrt(M))).
   */
  uintptr_t stratums;
  double tol;
  uintptr_t max_epochs;
  uint64_t seed;
  uintptr_t workers;
  /*
   Run the final solve on the fully merged data.
   */
  bool final_refine;
} SodmTrainConfig;

/*
 Hyperparameters and distributed SVRG settings (linear kernel).
 */
typedef struct SodmSvrgConfig {
  double lambda;
  double theta;
  double nu;
  uintptr_t nodes;
  /*
   0 picks min(32, ceil(sqrt(M))).
   */
  uintptr_t stratums;
  uintptr_t epochs;
  /*
   Negative picks the default step size.
   */
  double eta;
  uintptr_t steps_per_visit;
  uint64_t seed;
  uintptr_t workers;
} SodmSvrgConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread; empty after a success.
 The pointer stays valid until the next library call on this thread.
 */
const char *sodm_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *sodm_version(void);

/*
 Fills `out` with the default hierarchical settings (linear kernel,
 λ = 1, θ = 0.3, υ = 0.5).

 # Safety
 `out` must be null or point to writable memory for one config.
 */
enum SodmStatus sodm_train_config_default(struct SodmTrainConfig *out);

/*
 Fills `out` with the default SVRG settings (λ = 1, θ = 0.3, υ = 0.5).

 # Safety
 `out` must be null or point to writable memory for one config.
 */
enum SodmStatus sodm_svrg_config_default(struct SodmSvrgConfig *out);

/*
 Loads a LIBSVM file.

 # Safety
 `path` must be null or a NUL-terminated string; `out` must be null or
 writable.
 */
enum SodmStatus sodm_dataset_load_libsvm(const char *path, struct SodmDataset **out);

/*
 Builds a dataset from a row-major `rows × cols` matrix and ±1 labels.

 # Safety
 `values` must hold `rows * cols` doubles and `labels` `rows` bytes (either
 may be null when `rows` is 0); `out` must be null or writable.
 */
enum SodmStatus sodm_dataset_from_dense(const double *values,
                                        const int8_t *labels,
                                        uintptr_t rows,
                                        uintptr_t cols,
                                        struct SodmDataset **out);

/*
 # Safety
 `dataset` must be null or a live handle; `out` must be null or writable.
 */
enum SodmStatus sodm_dataset_len(const struct SodmDataset *dataset, uintptr_t *out);

/*
 # Safety
 `dataset` must be null or a live handle; `out` must be null or writable.
 */
enum SodmStatus sodm_dataset_num_features(const struct SodmDataset *dataset, uintptr_t *out);

/*
 # Safety
 `dataset` must be null or a handle not yet freed.
 */
void sodm_dataset_free(struct SodmDataset *dataset);

/*
 Hierarchical training.

 # Safety
 `dataset` and `config` must be null or valid; `out` must be null or writable.
 */
enum SodmStatus sodm_train(const struct SodmDataset *dataset,
                           const struct SodmTrainConfig *config,
                           struct SodmModel **out);

/*
 Distributed SVRG training with the linear kernel.

 # Safety
 `dataset` and `config` must be null or valid; `out` must be null or writable.
 */
enum SodmStatus sodm_train_svrg(const struct SodmDataset *dataset,
                                const struct SodmSvrgConfig *config,
                                struct SodmModel **out);

/*
 f(x) for one dense feature vector of length `len`.

 # Safety
 `model` must be null or live; `values` must hold `len` doubles (or be
 null with `len` 0); `out` must be null or writable.
 */
enum SodmStatus sodm_model_decision_value(const struct SodmModel *model,
                                          const double *values,
                                          uintptr_t len,
                                          double *out);

/*
 Writes one ±1 prediction per dataset row into `labels`.

 # Safety
 `model` and `dataset` must be null or live; `labels` must hold `capacity`
 bytes.
 */
enum SodmStatus sodm_model_predict(const struct SodmModel *model,
                                   const struct SodmDataset *dataset,
                                   int8_t *labels,
                                   uintptr_t capacity);

/*
 Serializes a model; free the result with [`sodm_string_free`].

 # Safety
 `model` must be null or live; `out` must be null or writable.
 */
enum SodmStatus sodm_model_to_json(const struct SodmModel *model, char **out);

/*
 # Safety
 `json` must be null or NUL-terminated; `out` must be null or writable.
 */
enum SodmStatus sodm_model_from_json(const char *json, struct SodmModel **out);

/*
 # Safety
 `model` must be null or a handle not yet freed.
 */
void sodm_model_free(struct SodmModel *model);

/*
 # Safety
 `s` must be null or a string returned by this library and not yet freed.
 */
void sodm_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SODM_H */
