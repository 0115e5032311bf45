/* C API for glaudit, the gender-leakage audit toolkit.
 *
 * Conventions:
 *   - Opaque handles are created and freed by this library only.
 *   - Fallible functions return a status code:
 *       0 = success, 1 = usage error, 2 = data error, 3 = internal error.
 *     On failure, glaudit_last_error_message() returns a copy of the
 *     message for the current thread (free with glaudit_string_free).
 *   - Strings returned through out-parameters are UTF-8, NUL-terminated,
 *     owned by the caller; release them with glaudit_string_free().
 *
 * Kept in sync with crates/ffi/src/lib.rs; regenerate with cbindgen
 * (configuration in crates/ffi/cbindgen.toml).
 */

#ifndef GLAUDIT_H
#define GLAUDIT_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#define GLAUDIT_OK 0
#define GLAUDIT_ERR_USAGE 1
#define GLAUDIT_ERR_DATA 2
#define GLAUDIT_ERR_INTERNAL 3

typedef struct glaudit_lexicon_t glaudit_lexicon_t;
typedef struct glaudit_corpus_t glaudit_corpus_t;
typedef struct glaudit_model_t glaudit_model_t;

/* Library version as a static string; do not free. */
const char *glaudit_version(void);

/* Copy of the current thread's last error message, or NULL. */
char *glaudit_last_error_message(void);

/* Release a string returned by this library. */
void glaudit_string_free(char *s);

/* ---- Lexicon ---------------------------------------------------------- */

/* Load the lexicon compiled into the library. */
int glaudit_lexicon_builtin(glaudit_lexicon_t **out);

/* Load a lexicon from a TSV file:
 * surface<TAB>gender<TAB>counterpart<TAB>category<TAB>pos. */
int glaudit_lexicon_load(const char *path, glaudit_lexicon_t **out);

void glaudit_lexicon_free(glaudit_lexicon_t *lexicon);

/* Number of terms; 0 for NULL input. */
size_t glaudit_lexicon_term_count(const glaudit_lexicon_t *lexicon);

/* Replace explicit male gender markers with their female counterparts. */
int glaudit_degender_text(const glaudit_lexicon_t *lexicon,
                          const char *text,
                          char **out);

/* Count lexicon matches in text. */
int glaudit_match_count(const glaudit_lexicon_t *lexicon,
                        const char *text,
                        size_t *out_count);

/* Mask whole-word occurrences of the given tokens with mask_symbol. */
int glaudit_mask_text(const char *text,
                      const char *const *tokens,
                      size_t n_tokens,
                      const char *mask_symbol,
                      char **out);

/* ---- Corpus ----------------------------------------------------------- */

/* Load a JSON-lines corpus: one {"id", "text", "gender"} object per line,
 * gender encoded 0 = female, 1 = male. */
int glaudit_corpus_load(const char *path, glaudit_corpus_t **out);

void glaudit_corpus_free(glaudit_corpus_t *corpus);

/* Number of letters; 0 for NULL input. */
size_t glaudit_corpus_len(const glaudit_corpus_t *corpus);

/* Female and male letter counts. */
int glaudit_corpus_class_counts(const glaudit_corpus_t *corpus,
                                size_t *out_female,
                                size_t *out_male);

/* ---- Model ------------------------------------------------------------ */

/* Load a serialized classifier model (JSON) produced by glaudit train. */
int glaudit_model_load(const char *path, glaudit_model_t **out);

void glaudit_model_free(glaudit_model_t *model);

/* Probability that the text describes a male candidate, in [0, 1].
 * External-probability models cannot score raw text (usage error). */
int glaudit_model_predict_proba(const glaudit_model_t *model,
                                const char *text,
                                double *out_proba);

/* Predicted label: 0 = female, 1 = male (ties go to male). */
int glaudit_model_predict(const glaudit_model_t *model,
                          const char *text,
                          int *out_label);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* GLAUDIT_H */
