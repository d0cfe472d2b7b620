#ifndef SBAR_H
#define SBAR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SbarStatus {
  SBAR_STATUS_OK = 0,
  SBAR_STATUS_NULL_POINTER = 1,
  SBAR_STATUS_INVALID_ARGUMENT = 2,
  SBAR_STATUS_DIMENSION_MISMATCH = 3,
  SBAR_STATUS_PLAN_TOO_LARGE = 4,
  SBAR_STATUS_INVALID_INDEX = 5,
  SBAR_STATUS_SINGULAR_SYSTEM = 6,
  SBAR_STATUS_NON_POSITIVE_DENOMINATOR = 7,
  SBAR_STATUS_PLAN_MISMATCH = 8,
  SBAR_STATUS_NOISE_POWER_MISMATCH = 9,
  SBAR_STATUS_IO = 10,
  SBAR_STATUS_FORMAT = 11,
  SBAR_STATUS_PANIC = 12,
  SBAR_STATUS_OTHER = 13,
} SbarStatus;

// Opaque covariance kernel.
typedef struct SbarKernel SbarKernel;

// Opaque sampling plan.
typedef struct SbarPlan SbarPlan;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, a static NUL-terminated string.
const char *sbar_version(void);

// Message of the last failed call on this thread, or an empty string.
// Valid until the next failing call on the same thread.
const char *sbar_last_error_message(void);

// Bessel kernel `alpha^2 J_order(d / eta)` on a uniform array, with
// distances and `eta` in wavelengths and the default relative jitter.
//
// # Safety
// `out` must be valid for writes.
enum SbarStatus sbar_kernel_bessel(size_t num_ports,
                                   double aperture_in_wavelengths,
                                   double carrier_hz,
                                   double alpha,
                                   double eta,
                                   uint32_t order,
                                   struct SbarKernel **out);

// Exponential kernel `alpha^2 exp(-d^2 / eta^2)`, units as for
// `sbar_kernel_bessel`.
//
// # Safety
// `out` must be valid for writes.
enum SbarStatus sbar_kernel_exponential(size_t num_ports,
                                        double aperture_in_wavelengths,
                                        double carrier_hz,
                                        double alpha,
                                        double eta,
                                        struct SbarKernel **out);

// # Safety
// `path` must be a NUL-terminated string and `out` valid for writes.
enum SbarStatus sbar_kernel_load(const char *path, struct SbarKernel **out);

// Writes JSON when `path` ends in `.json`, binary otherwise.
//
// # Safety
// `kernel` must come from this library; `path` must be NUL-terminated.
enum SbarStatus sbar_kernel_save(const struct SbarKernel *kernel, const char *path);

// Zero for a null handle.
//
// # Safety
// `kernel` must be null or come from this library.
size_t sbar_kernel_num_ports(const struct SbarKernel *kernel);

// # Safety
// `kernel` must be null or a live handle from this library.
void sbar_kernel_free(struct SbarKernel *kernel);

// Greedy design of `num_timeslots * antennas_per_slot` measurements.
//
// # Safety
// `kernel` must come from this library and `out` be valid for writes.
enum SbarStatus sbar_plan_design(const struct SbarKernel *kernel,
                                 size_t num_timeslots,
                                 size_t antennas_per_slot,
                                 double noise_power,
                                 struct SbarPlan **out);

// # Safety
// `path` must be a NUL-terminated string and `out` valid for writes.
enum SbarStatus sbar_plan_load(const char *path, struct SbarPlan **out);

// # Safety
// `plan` must come from this library; `path` must be NUL-terminated.
enum SbarStatus sbar_plan_save(const struct SbarPlan *plan, const char *path);

// # Safety
// `plan` must be null or a live handle from this library.
void sbar_plan_free(struct SbarPlan *plan);

// Zero for a null handle.
//
// # Safety
// `plan` must be null or come from this library.
size_t sbar_plan_num_ports(const struct SbarPlan *plan);

// Zero for a null handle.
//
// # Safety
// `plan` must be null or come from this library.
size_t sbar_plan_num_timeslots(const struct SbarPlan *plan);

// Zero for a null handle.
//
// # Safety
// `plan` must be null or come from this library.
size_t sbar_plan_antennas_per_slot(const struct SbarPlan *plan);

// `num_timeslots * antennas_per_slot`; zero for a null handle.
//
// # Safety
// `plan` must be null or come from this library.
size_t sbar_plan_num_measurements(const struct SbarPlan *plan);

// Design-time noise power; NaN for a null handle.
//
// # Safety
// `plan` must be null or come from this library.
double sbar_plan_noise_power(const struct SbarPlan *plan);

// Content hash of the plan; owned by the handle. Null for a null handle.
//
// # Safety
// `plan` must be null or come from this library.
const char *sbar_plan_id(const struct SbarPlan *plan);

// Copies the 1-based measurement order, slot by slot, into `out`.
//
// # Safety
// `out` must hold `len` elements; `len` must equal the measurement count.
enum SbarStatus sbar_plan_order(const struct SbarPlan *plan, size_t *out, size_t len);

// Simulates the plan's pilots on channel `h` (`num_ports` complex values)
// and writes the measurement-count complex samples to `y_out`.
//
// # Safety
// Buffers must hold the stated number of interleaved complex values.
enum SbarStatus sbar_plan_observe(const struct SbarPlan *plan,
                                  const double *h,
                                  size_t h_len,
                                  double noise_power,
                                  uint64_t seed,
                                  double *y_out);

// Posterior-mean reconstruction from `y_len` complex pilot samples.
// Writes `num_ports` complex values to `estimate_out` and, when
// `variance_out` is non-null, `num_ports` posterior variances.
//
// # Safety
// Buffers must hold the stated number of values.
enum SbarStatus sbar_reconstruct(const struct SbarPlan *plan,
                                 const double *y,
                                 size_t y_len,
                                 double noise_power,
                                 double *estimate_out,
                                 double *variance_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SBAR_H */
