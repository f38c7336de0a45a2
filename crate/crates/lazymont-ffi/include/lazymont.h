#ifndef LAZYMONT_H
#define LAZYMONT_H

/* Generated by cbindgen from the lazymont-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible call.
typedef enum LmStatus {
  // Success.
  LM_STATUS_OK = 0,
  // A pointer argument was null or a string was not valid hex/UTF-8.
  LM_STATUS_INVALID_ARGUMENT = 1,
  // The modulus is unusable (even, too small, or too wide).
  LM_STATUS_INVALID_MODULUS = 2,
  // The output buffer is too small for the result.
  LM_STATUS_BUFFER_TOO_SMALL = 3,
  // The curve budget was exhausted without finding a factor.
  LM_STATUS_NO_FACTOR = 4,
  // An internal invariant failed.
  LM_STATUS_INTERNAL = 5,
} LmStatus;

// Opaque Montgomery context for a fixed odd modulus.
typedef struct LmContext LmContext;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Create a context for an odd modulus given as hex. On success `*out` owns
// the context; release it with `lm_context_free`.
//
// # Safety
// `modulus_hex` must be a valid NUL-terminated string and `out` a valid
// pointer to writable storage for one pointer.
enum LmStatus lm_context_new(const char *modulus_hex, struct LmContext **out);

// Release a context created by `lm_context_new`. A null pointer is ignored.
//
// # Safety
// `ctx` must be a pointer previously returned by `lm_context_new` that has
// not been freed yet.
void lm_context_free(struct LmContext *ctx);

// Bit length of the context's modulus.
//
// # Safety
// `ctx` must be a live context pointer.
uint32_t lm_context_modulus_bits(const struct LmContext *ctx);

// Working width in bits (the modulus plus headroom, limb aligned).
//
// # Safety
// `ctx` must be a live context pointer.
uint32_t lm_context_work_bits(const struct LmContext *ctx);

// Canonical modular product `a * b mod m` through the Montgomery pipeline.
// `out` receives lowercase hex, NUL-terminated.
//
// # Safety
// `ctx` must be a live context pointer, the strings valid and
// NUL-terminated, and `out` writable for `out_cap` bytes.
enum LmStatus lm_mulmod(const struct LmContext *ctx,
                        const char *a_hex,
                        const char *b_hex,
                        char *out,
                        uintptr_t out_cap);

// ECM stage-1 factor search on an odd composite given as hex. Tries
// `curves` sigma seeds derived from `seed` with smoothness bound `b1`.
// On success writes a proper factor to `out` and returns `LM_STATUS_OK`;
// returns `LM_STATUS_NO_FACTOR` when the budget is exhausted.
//
// # Safety
// `n_hex` must be a valid NUL-terminated string and `out` writable for
// `out_cap` bytes.
enum LmStatus lm_factor(const char *n_hex,
                        uint64_t b1,
                        uint32_t curves,
                        uint64_t seed,
                        char *out,
                        uintptr_t out_cap);

// Closed-form optimal truncation split for a multiplier of complexity
// `O(n^alpha)`, `1 < alpha <= 2`. Writes `rho_hat` and `c_rho`.
//
// # Safety
// `rho_hat` and `c_rho` must be valid writable pointers.
enum LmStatus lm_optimal_rho(double alpha, double *rho_hat, double *c_rho);

// Static version string of the library.
const char *lm_version(void);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* LAZYMONT_H */
