#ifndef WORM_SZEGO_H
#define WORM_SZEGO_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every exported function.
 */
typedef enum WsStatus {
  WS_STATUS_OK = 0,
  WS_STATUS_NULL_POINTER = 1,
  WS_STATUS_INVALID_PARAMETER = 2,
  WS_STATUS_DOMAIN = 3,
  WS_STATUS_GRID_MISMATCH = 4,
  WS_STATUS_EMPTY_GRID = 5,
  WS_STATUS_CONFIG = 6,
  WS_STATUS_IO = 7,
  WS_STATUS_BUFFER_TOO_SMALL = 8,
  WS_STATUS_PANIC = 9,
} WsStatus;

/**
 * Domain parameters plus the cached evaluators for `nu`, `k_j` and `K`.
 */
typedef struct WsContext WsContext;

/**
 * A boundary projection bound to one sampling grid.
 */
typedef struct WsProjector WsProjector;

/**
 * A complex number laid out as two doubles.
 */
typedef struct WsComplex {
  double re;
  double im;
} WsComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the message of the last failed call on this thread into `buf`, NUL-terminated.
 *
 * Returns the message length without the terminator, or 0 when there is no error.
 * When `buf` is null or `len` is too small nothing is written, so the return value
 * can be used to size the buffer.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t ws_last_error_message(char *buf, size_t len);

/**
 * Creates a context for the domain with parameter `beta > pi/2`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum WsStatus ws_context_new(double beta, struct WsContext **out);

/**
 * Releases a context. Passing null is a no-op.
 *
 * # Safety
 * `ctx` must be null or a handle from [`ws_context_new`] that has not been freed.
 */
void ws_context_free(struct WsContext *ctx);

/**
 * Writes `ln nu(xi, j)` to `out`.
 *
 * # Safety
 * `ctx` must be a live context and `out` a valid pointer.
 */
enum WsStatus ws_log_nu(const struct WsContext *ctx, double xi, int64_t j, double *out);

/**
 * Writes the mode kernel `k_j(z, w)` for strip points `z`, `w` to `out`.
 *
 * # Safety
 * `ctx` must be a live context and `out` a valid pointer.
 */
enum WsStatus ws_kj(const struct WsContext *ctx,
                    struct WsComplex z,
                    struct WsComplex w,
                    int64_t j,
                    struct WsComplex *out);

/**
 * Writes the Szego kernel `K(z, w)` truncated at `|j| <= j_max` to `out`.
 *
 * `tail_ratio` may be null; otherwise it receives the size of the last retained
 * terms relative to the partial sum.
 *
 * # Safety
 * `ctx` must be a live context, `out` a valid pointer and `tail_ratio` null or valid.
 */
enum WsStatus ws_szego(const struct WsContext *ctx,
                       struct WsComplex z1,
                       struct WsComplex z2,
                       struct WsComplex w1,
                       struct WsComplex w2,
                       int64_t j_max,
                       struct WsComplex *out,
                       double *tail_ratio);

/**
 * Builds the projection on a grid of `n_x` x-nodes over `[-l, l)`, `n_v` vertical nodes
 * per sheet and `n_theta` angles, with `n_t` quadrature nodes for the transverse integral.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum WsStatus ws_projector_new(double beta,
                               double l,
                               size_t n_x,
                               size_t n_v,
                               size_t n_theta,
                               size_t n_t,
                               struct WsProjector **out);

/**
 * Releases a projector. Passing null is a no-op.
 *
 * # Safety
 * `p` must be null or a handle from [`ws_projector_new`] that has not been freed.
 */
void ws_projector_free(struct WsProjector *p);

/**
 * Number of complex samples in a field on the projector's grid.
 *
 * Samples are ordered by sheet, then vertical node, then x node, then angle.
 * Returns 0 for a null handle.
 *
 * # Safety
 * `p` must be null or a live projector.
 */
size_t ws_projector_field_len(const struct WsProjector *p);

/**
 * Coordinates of sample `index`: sheet label (1 to 4), `x`, vertical coordinate `v`, angle `theta`.
 *
 * # Safety
 * `p` must be a live projector and the four output pointers valid.
 */
enum WsStatus ws_projector_node(const struct WsProjector *p,
                                size_t index,
                                uint32_t *sheet,
                                double *x,
                                double *v,
                                double *theta);

/**
 * Applies the projection to `len` samples from `input`, writing `len` samples to `output`.
 *
 * `len` must equal [`ws_projector_field_len`]. The buffers may alias.
 *
 * # Safety
 * `p` must be a live projector; `input` and `output` must point to `len` elements.
 */
enum WsStatus ws_projector_apply(const struct WsProjector *p,
                                 const struct WsComplex *input,
                                 struct WsComplex *output,
                                 size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WORM_SZEGO_H */
