#ifndef PROOFMILL_H
#define PROOFMILL_H

/* Generated by cbindgen from proofmill-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes returned by every fallible entry point.
typedef enum pm_error {
  PM_OK = 0,
  PM_ERROR_NULL_POINTER = 1,
  PM_ERROR_INVALID_UTF8 = 2,
  PM_ERROR_INVALID_ARGUMENT = 3,
  PM_ERROR_PANIC = 4,
} pm_error;

// Verdict of a toy check.
typedef enum pm_status {
  PM_STATUS_PASS = 0,
  PM_STATUS_FAIL = 1,
  PM_STATUS_TIMEOUT = 2,
} pm_status;

// Opaque deterministic checker handle.
typedef struct pm_toy_checker pm_toy_checker;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static string; do not free.
const char *pm_version(void);

// Detail for the most recent error on this thread. The pointer stays valid
// until the next proofmill call on the same thread; do not free.
const char *pm_last_error_message(void);

// Release a string returned by this library.
//
// # Safety
// `ptr` must be NULL or a pointer previously returned through a proofmill
// out-parameter, passed exactly once.
void pm_string_free(char *ptr);

// Create a toy checker. Release with [`pm_toy_checker_free`].
struct pm_toy_checker *pm_toy_checker_new(void);

// # Safety
// `checker` must be NULL or a pointer from [`pm_toy_checker_new`], passed
// exactly once.
void pm_toy_checker_free(struct pm_toy_checker *checker);

// Check `statement_body` (a `theorem <name> : <int-expr> = <int-expr> :=`
// declaration) against `proof_text` under a wall-clock timeout.
//
// # Safety
// `checker` must come from [`pm_toy_checker_new`]; the strings must be
// NUL-terminated and readable; out-pointers must be writable or NULL.
enum pm_error pm_toy_checker_check(const struct pm_toy_checker *checker,
                                   const char *statement_body,
                                   const char *proof_text,
                                   uint64_t timeout_ms,
                                   enum pm_status *out_status,
                                   uint64_t *out_wall_time_ms);

// Unbiased pass@k estimate `1 - C(n-c, k)/C(n, k)`.
//
// # Safety
// `out_value` must be writable.
enum pm_error pm_pass_at_k_unbiased(uint64_t n, uint64_t c, uint64_t k, double *out_value);

// Proof length (characters, newline-normalized) and whitespace-delimited
// `try` token count outside comments and strings.
//
// # Safety
// `proof_text` must be a readable NUL-terminated string; out-pointers must
// be writable or NULL.
enum pm_error pm_proof_stats(const char *proof_text, uint64_t *out_length, uint64_t *out_try_count);

// Canonical deduplication key of a statement body: comments stripped,
// whitespace collapsed, ends trimmed. The result must be released with
// [`pm_string_free`].
//
// # Safety
// `body` must be a readable NUL-terminated string; `out_key` must be
// writable.
enum pm_error pm_normalized_key(const char *body, char **out_key);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PROOFMILL_H */
