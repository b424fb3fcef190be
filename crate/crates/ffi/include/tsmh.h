#ifndef TSMH_H
#define TSMH_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result of a fallible call.
typedef enum TsmhStatus {
  TSMH_STATUS_OK = 0,
  // Any failure not covered below.
  TSMH_STATUS_OTHER = 1,
  // Invalid configuration, keywords, or arguments.
  TSMH_STATUS_CONFIG = 2,
  // The language model backend failed.
  TSMH_STATUS_BACKEND = 3,
  // A required pointer was null.
  TSMH_STATUS_NULL_ARGUMENT = 4,
  // A string argument was not UTF-8.
  TSMH_STATUS_INVALID_UTF8 = 5,
  // The library panicked; the handle involved should be discarded.
  TSMH_STATUS_PANIC = 6,
} TsmhStatus;

// A finished chain.
typedef struct TsmhRun TsmhRun;

// A loaded task: vocabulary, categories, language model and scorers.
typedef struct TsmhTask TsmhTask;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. The pointer
// stays valid until the next library call on the same thread.
const char *tsmh_last_error(void);

// Library version as a static string.
const char *tsmh_version(void);

// Loads a task from a TOML config file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer to
// write the handle to.
enum TsmhStatus tsmh_task_from_config(const char *path, struct TsmhTask **out);

// # Safety
// `task` must come from [`tsmh_task_from_config`] and not be used again.
// NULL is ignored.
void tsmh_task_free(struct TsmhTask *task);

// Runs one chain. `keywords` are whitespace-separated; NULL or empty uses
// the config's keywords. `method` is "tsmh" or "cgmh". `steps` of 0 uses
// the configured budget for the method.
//
// # Safety
// `task` must be a live handle, string arguments NUL-terminated or NULL
// where allowed, and `out` a valid pointer.
enum TsmhStatus tsmh_generate(const struct TsmhTask *task,
                              const char *keywords,
                              const char *method,
                              uint64_t seed,
                              uint32_t steps,
                              struct TsmhRun **out);

// # Safety
// `run` must come from [`tsmh_generate`] and not be used again. NULL is
// ignored.
void tsmh_run_free(struct TsmhRun *run);

// Number of recorded steps; 0 for NULL.
//
// # Safety
// `run` must be a live handle or NULL.
uintptr_t tsmh_run_steps(const struct TsmhRun *run);

// Highest-scoring sentence of the chain. Free with [`tsmh_string_free`].
// NULL for a NULL handle.
//
// # Safety
// `run` must be a live handle or NULL.
char *tsmh_run_best_sentence(const struct TsmhRun *run);

// `ln π` of the best sentence, NaN for NULL.
//
// # Safety
// `run` must be a live handle or NULL.
double tsmh_run_best_log_pi(const struct TsmhRun *run);

// Violated constraints of the best sentence; -1 for NULL.
//
// # Safety
// `run` must be a live handle or NULL.
int64_t tsmh_run_best_constraint_error(const struct TsmhRun *run);

// Fraction of steps accepted, NaN for NULL.
//
// # Safety
// `run` must be a live handle or NULL.
double tsmh_run_acceptance_rate(const struct TsmhRun *run);

// Fraction of recorded states with no violation, NaN for NULL.
//
// # Safety
// `run` must be a live handle or NULL.
double tsmh_run_valid_fraction(const struct TsmhRun *run);

// The per-step trace as JSON lines. Free with [`tsmh_string_free`].
//
// # Safety
// `run` must be a live handle or NULL.
char *tsmh_run_jsonl(const struct TsmhRun *run);

// # Safety
// `s` must be a string returned by this library and not freed before.
// NULL is ignored.
void tsmh_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TSMH_H */
