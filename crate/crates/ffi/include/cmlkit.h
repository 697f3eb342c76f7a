#ifndef CMLKIT_H
#define CMLKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CmlSatVerdict {
  CML_SAT_VERDICT_SAT = 0,
  CML_SAT_VERDICT_UNSAT = 1,
  CML_SAT_VERDICT_UNKNOWN = 2,
} CmlSatVerdict;

/**
 * Result of every fallible call.
 */
typedef enum CmlStatus {
  CML_STATUS_OK = 0,
  CML_STATUS_NULL_ARGUMENT = 1,
  CML_STATUS_INVALID_UTF8 = 2,
  CML_STATUS_PARSE_ERROR = 3,
  CML_STATUS_FRAGMENT_UNSUPPORTED = 4,
  CML_STATUS_SOLVER_ERROR = 5,
  CML_STATUS_UNKNOWN_TRANSITION = 6,
  CML_STATUS_INTERNAL = 7,
} CmlStatus;

/**
 * A closed formula together with its signature.
 */
typedef struct CmlFormula CmlFormula;

/**
 * A parsed net.
 */
typedef struct CmlModel CmlModel;

/**
 * Outcome of an invariant check.
 */
typedef struct CmlReport CmlReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *cml_last_error(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void cml_string_free(char *s);

/**
 * Parses a model file's text.
 *
 * # Safety
 * `text` must be a NUL-terminated string, `out` a valid pointer.
 */
enum CmlStatus cml_model_parse(const char *text, struct CmlModel **out);

/**
 * # Safety
 * `m` must come from `cml_model_parse` or be null.
 */
void cml_model_free(struct CmlModel *m);

/**
 * Number of transitions of the model, 0 for null.
 *
 * # Safety
 * `m` must be a live model or null.
 */
size_t cml_model_transition_count(const struct CmlModel *m);

/**
 * Parses a formula. A header in the text wins; otherwise the model's
 * signature is used when `model` is not null, else one is inferred.
 *
 * # Safety
 * `text` must be NUL-terminated, `model` live or null, `out` valid.
 */
enum CmlStatus cml_formula_parse(const char *text,
                                 const struct CmlModel *model,
                                 struct CmlFormula **out);

/**
 * # Safety
 * `f` must come from this library or be null.
 */
void cml_formula_free(struct CmlFormula *f);

/**
 * Text form of a formula, parseable again. Null for a null handle.
 *
 * # Safety
 * `f` must be a live formula or null.
 */
char *cml_formula_to_string(const struct CmlFormula *f);

/**
 * Symbolic successors through `transition`, or through every transition
 * when `transition` is null.
 *
 * # Safety
 * Handles must be live; `transition` NUL-terminated or null; `out` valid.
 */
enum CmlStatus cml_post(const struct CmlModel *model,
                        const struct CmlFormula *formula,
                        const char *transition,
                        struct CmlFormula **out);

/**
 * Symbolic predecessors; see `cml_post`.
 *
 * # Safety
 * As for `cml_post`.
 */
enum CmlStatus cml_pre(const struct CmlModel *model,
                       const struct CmlFormula *formula,
                       const char *transition,
                       struct CmlFormula **out);

/**
 * Decides satisfiability with the default solver settings.
 *
 * # Safety
 * `formula` must be live and `out` valid.
 */
enum CmlStatus cml_check_sat(const struct CmlFormula *formula, enum CmlSatVerdict *out);

/**
 * Checks that `inv` is an inductive invariant, or with `aux` non-null that
 * `init => aux => inv` and `aux` is inductive.
 *
 * # Safety
 * `model`, `init`, `inv` must be live; `aux` live or null; `out` valid.
 */
enum CmlStatus cml_check_invariant(const struct CmlModel *model,
                                   const struct CmlFormula *init,
                                   const struct CmlFormula *inv,
                                   const struct CmlFormula *aux,
                                   struct CmlReport **out);

/**
 * 1 when every lemma is unsatisfiable, 0 otherwise or for null.
 *
 * # Safety
 * `r` must be a live report or null.
 */
int32_t cml_report_holds(const struct CmlReport *r);

/**
 * # Safety
 * `r` must be a live report or null.
 */
size_t cml_report_lemma_count(const struct CmlReport *r);

/**
 * The report as JSON. Null for a null handle.
 *
 * # Safety
 * `r` must be a live report or null.
 */
char *cml_report_json(const struct CmlReport *r);

/**
 * # Safety
 * `r` must come from this library or be null.
 */
void cml_report_free(struct CmlReport *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CMLKIT_H */
