#ifndef EPRLAB_H
#define EPRLAB_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EprStatus {
  EPR_STATUS_OK = 0,
  EPR_STATUS_NULL_POINTER = 1,
  EPR_STATUS_CONFIG = 2,
  EPR_STATUS_SIZE = 3,
  EPR_STATUS_FORMAT = 4,
  EPR_STATUS_DIMENSION = 5,
  EPR_STATUS_CAPABILITY = 6,
  EPR_STATUS_AMBIGUITY = 7,
  EPR_STATUS_NODE = 8,
  EPR_STATUS_COVERAGE = 9,
  EPR_STATUS_STATE = 10,
  EPR_STATUS_IO = 11,
  EPR_STATUS_BUFFER_TOO_SMALL = 12,
  EPR_STATUS_PANIC = 13,
} EprStatus;

typedef struct EprBohmField EprBohmField;

typedef struct EprDenseCoder EprDenseCoder;

typedef struct EprTeleporter EprTeleporter;

/**
 * Bell label: sign is +1 or -1.
 */
typedef struct EprLabel {
  uint32_t k;
  int32_t sign;
  uint32_t j;
} EprLabel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length.
 */
uintptr_t eprlab_last_error(char *buf, uintptr_t len);

/**
 * Dense coder over 2N channels with the built-in Hadamard choice.
 */
enum EprStatus eprlab_dense_new(uintptr_t n, struct EprDenseCoder **out);

void eprlab_dense_free(struct EprDenseCoder *h);

uintptr_t eprlab_dense_n(const struct EprDenseCoder *h);

/**
 * Encodes message m in [0, 4N²), measures, and writes the decoded message.
 */
enum EprStatus eprlab_dense_roundtrip(const struct EprDenseCoder *h,
                                      uintptr_t message,
                                      uintptr_t *decoded,
                                      struct EprLabel *label);

/**
 * Writes the (2N)² amplitudes of a Bell state into re/im.
 */
enum EprStatus eprlab_dense_bell(const struct EprDenseCoder *h,
                                 struct EprLabel label,
                                 double *re,
                                 double *im,
                                 uintptr_t len);

/**
 * Bell measurement of a pair state of length (2N)².
 */
enum EprStatus eprlab_dense_measure(const struct EprDenseCoder *h,
                                    const double *re,
                                    const double *im,
                                    uintptr_t len,
                                    struct EprLabel *label,
                                    double *weight);

enum EprStatus eprlab_teleporter_new(uintptr_t n, struct EprTeleporter **out);

void eprlab_teleporter_free(struct EprTeleporter *h);

/**
 * Teleports a 2N-amplitude state with a seeded measurement. Bob's corrected
 * state is written to out_re/out_im when they are non-null.
 */
enum EprStatus eprlab_teleport(const struct EprTeleporter *h,
                               const double *re,
                               const double *im,
                               uintptr_t len,
                               uint64_t seed,
                               struct EprLabel *outcome,
                               double *fidelity,
                               double *out_re,
                               double *out_im);

/**
 * Field from a JSON experiment config (NUL-terminated UTF-8).
 */
enum EprStatus eprlab_bohm_new(const char *json, struct EprBohmField **out);

void eprlab_bohm_free(struct EprBohmField *h);

/**
 * Guidance velocities at (y1, y2, t), x on the free paths.
 */
enum EprStatus eprlab_bohm_velocities(const struct EprBohmField *h,
                                      double y1,
                                      double y2,
                                      double t,
                                      double *v1,
                                      double *v2);

/**
 * Endpoint of one trajectory from (y1, y2) at t=0 to t_final.
 * `truncated` is set to 1 when the integrator stopped at a node.
 */
enum EprStatus eprlab_bohm_trajectory_end(const struct EprBohmField *h,
                                          double y1,
                                          double y2,
                                          double t_final,
                                          double *end_y1,
                                          double *end_y2,
                                          int32_t *truncated);

/**
 * y0 √(1 + a²) for the configured parameters.
 */
enum EprStatus eprlab_bohm_com(const struct EprBohmField *h, double y0, double t, double *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* EPRLAB_H */
