#ifndef MHNPATH_H
#define MHNPATH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum MhnStatus {
  MHN_STATUS_OK = 0,
  MHN_STATUS_NULL_POINTER = 1,
  MHN_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed SMILES, JSON or file contents.
   */
  MHN_STATUS_PARSE = 3,
  MHN_STATUS_IO = 4,
  /**
   * Rejected configuration or incompatible model and library.
   */
  MHN_STATUS_CONFIG = 5,
  /**
   * Failure inside the engine after inputs were accepted.
   */
  MHN_STATUS_RUNTIME = 6,
  MHN_STATUS_PANIC = 7,
} MhnStatus;

/**
 * Price catalog handle.
 */
typedef struct MhnCatalog MhnCatalog;

/**
 * Template library handle.
 */
typedef struct MhnLibrary MhnLibrary;

/**
 * Template ranker handle: a model ensemble or, without models, every
 * template in library order.
 */
typedef struct MhnRanker MhnRanker;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until
 * the next call on the same thread.
 */
const char *mhn_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mhn_version(void);

/**
 * Release a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` is null or was returned by this library and not yet freed.
 */
void mhn_string_free(char *s);

/**
 * Canonical SMILES of `smiles`, written to `*out`.
 *
 * # Safety
 * `smiles` is a NUL-terminated string and `out_smiles` is writable.
 */
enum MhnStatus mhn_canonicalize(const char *smiles, char **out_smiles);

/**
 * Load a template library TSV.
 *
 * # Safety
 * `path` is a NUL-terminated string and `out_lib` is writable.
 */
enum MhnStatus mhn_library_load(const char *path, struct MhnLibrary **out_lib);

/**
 * Number of templates, or 0 for null.
 *
 * # Safety
 * `lib` is null or a live handle.
 */
size_t mhn_library_len(const struct MhnLibrary *lib);

/**
 * # Safety
 * `lib` is null or a live handle, which this call invalidates.
 */
void mhn_library_free(struct MhnLibrary *lib);

/**
 * Build a ranker over `lib` from `n_models` model files. With zero
 * models every template is proposed in library order. The library is
 * copied; the handle stays owned by the caller.
 *
 * # Safety
 * `lib` is a live handle, `model_paths` points to `n_models` strings
 * (or may be null when `n_models` is 0) and `out_ranker` is writable.
 */
enum MhnStatus mhn_ranker_load(const struct MhnLibrary *lib,
                               const char *const *model_paths,
                               size_t n_models,
                               struct MhnRanker **out_ranker);

/**
 * # Safety
 * `r` is null or a live handle, which this call invalidates.
 */
void mhn_ranker_free(struct MhnRanker *r);

/**
 * Rank templates for one molecule. Writes up to `capacity` template ids
 * and scores, best first, and the count to `*out_len`.
 *
 * # Safety
 * `ranker` is a live handle, `smiles` a NUL-terminated string,
 * `out_ids` and `out_scores` hold `capacity` elements and `out_len` is
 * writable.
 */
enum MhnStatus mhn_rank(const struct MhnRanker *ranker,
                        const char *smiles,
                        size_t capacity,
                        bool screen,
                        size_t *out_ids,
                        double *out_scores,
                        size_t *out_len);

/**
 * Load a price catalog CSV.
 *
 * # Safety
 * `path` is a NUL-terminated string and `out_catalog` is writable.
 */
enum MhnStatus mhn_catalog_load(const char *path, struct MhnCatalog **out_catalog);

/**
 * # Safety
 * `c` is null or a live handle, which this call invalidates.
 */
void mhn_catalog_free(struct MhnCatalog *c);

/**
 * Plan routes for `smiles` with the synthetic ranker and catalog. The
 * search configuration is a JSON object (null for defaults). Writes the
 * search tree as JSON to `*out_tree` and the number of solved routes to
 * `*out_routes`. Conditions use the default row and toxicity classes
 * default to neutral.
 *
 * # Safety
 * Handles are live, strings are NUL-terminated or `config_json` is null,
 * and the out parameters are writable.
 */
enum MhnStatus mhn_search(const struct MhnRanker *ranker,
                          const struct MhnCatalog *catalog,
                          const char *smiles,
                          const char *config_json,
                          char **out_tree,
                          size_t *out_routes);

/**
 * Cost, temperature and solvent sub-scores and their weighted sum for
 * one reaction. `solvent_class` is -1, 0 or +1.
 *
 * # Safety
 * `out_composite` is writable.
 */
enum MhnStatus mhn_composite_score(double total_cost_usd_per_g,
                                   double temperature_c,
                                   int32_t solvent_class,
                                   double w_cost,
                                   double w_temp,
                                   double w_solv,
                                   double *out_composite);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MHNPATH_H */
