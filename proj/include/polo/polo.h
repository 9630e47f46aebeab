/* C interface to the polo knowledge-graph reasoning library.
 *
 * All functions that can fail return a polo_status; POLO_OK means success.
 * On failure, polo_last_error() returns a message describing what went
 * wrong (thread-local, valid until the next failing call on the same
 * thread). Objects are opaque handles created by the _open/_create
 * functions and released by the matching _close; closing NULL is a no-op.
 * Strings returned through char** out-parameters are heap-allocated and
 * must be released with polo_string_free.
 */
#ifndef POLO_POLO_H
#define POLO_POLO_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum polo_status {
  POLO_OK = 0,
  POLO_USAGE_ERROR = 1,   /* bad arguments, unknown settings, missing flags */
  POLO_DATA_ERROR = 2,    /* malformed input files */
  POLO_RUNTIME_ERROR = 3  /* execution failures: I/O, divergence, internal */
} polo_status;

/* Library version as "major.minor.patch". Static storage; do not free. */
const char* polo_version(void);

/* Message of the last failure on the calling thread, or "" if none. */
const char* polo_last_error(void);

void polo_string_free(char* s);

/* ---- settings ---------------------------------------------------------- */

typedef struct polo_settings polo_settings;

/* Fresh settings with every key at its default. Never fails. */
polo_settings* polo_settings_create(void);
void polo_settings_close(polo_settings* s);

/* Applies a key=value file ('#' comments, blank lines ignored). */
polo_status polo_settings_load_file(polo_settings* s, const char* path);

/* Sets one key, e.g. ("lambda", "0.5"). Unknown key: POLO_USAGE_ERROR. */
polo_status polo_settings_set(polo_settings* s, const char* key, const char* value);

/* All settings as sorted "key=value" lines; enough to reproduce a run. */
polo_status polo_settings_dump(const polo_settings* s, char** out_text);

/* ---- dataset ----------------------------------------------------------- */

typedef struct polo_dataset polo_dataset;

/* Loads train.txt (required) plus optional valid.txt, test.txt, graph.txt
 * and types.tsv from dir. The settings supply the target relation whose
 * triples form the train/valid/test queries. */
polo_status polo_dataset_open(const char* dir, const polo_settings* s, polo_dataset** out);
void polo_dataset_close(polo_dataset* d);

/* Counts: interned entities, base relations (inverses and the stay-in-place
 * relation excluded), and deduplicated base triples. Null out-pointers are
 * skipped. */
polo_status polo_dataset_counts(const polo_dataset* d, uint64_t* out_entities,
                                uint64_t* out_relations, uint64_t* out_triples);

/* Per-type statistics as TSV: "type\tentities\tavg_degree" plus header. */
polo_status polo_type_stats(const polo_dataset* d, char** out_tsv);

/* ---- rules ------------------------------------------------------------- */

typedef struct polo_ruleset polo_ruleset;

/* Parses a rule file against the dataset's vocabulary. Each line:
 * score, head relation, then alternating relation/type body fields,
 * tab-separated. Bodies must be cyclic for the target relation. */
polo_status polo_ruleset_open(const polo_dataset* d, const char* path, polo_ruleset** out);
void polo_ruleset_close(polo_ruleset* r);

size_t polo_ruleset_size(const polo_ruleset* r);

/* Re-estimates each rule's confidence by sampling body-constrained walks
 * (sample count and seed from the settings). TSV out:
 * "rule\tconfidence\tsamples_completed" plus header, rules in file order. */
polo_status polo_estimate_confidence(const polo_dataset* d, const polo_ruleset* r,
                                     const polo_settings* s, char** out_tsv);

/* ---- training ---------------------------------------------------------- */

/* Called after each epoch (1-based). Passing data back out is the caller's
 * business via user_data; the callback must not call back into polo. */
typedef void (*polo_epoch_callback)(int epoch, double mean_reward, double rule_match_rate,
                                    double val_hits1_pruned, void* user_data);

/* Trains a policy on the dataset's training queries and writes to out_dir:
 *   checkpoint.polo    best-validation model
 *   diagnostics.csv    per-epoch reward/rule-match/validation curves
 *   config.resolved    the exact settings snapshot used
 * The callback may be NULL. */
polo_status polo_train(const polo_dataset* d, const polo_ruleset* r, const polo_settings* s,
                       const char* out_dir, polo_epoch_callback cb, void* user_data);

/* ---- trained models ---------------------------------------------------- */

typedef struct polo_model polo_model;

/* Loads a checkpoint written by polo_train. */
polo_status polo_model_open(const char* checkpoint_path, polo_model** out);
void polo_model_close(polo_model* m);

/* Ranks the dataset's test queries by beam search and writes to out_dir:
 *   eval_report.csv    standard and rule-pruned rows of filtered
 *                      hits@1/3/10 and MRR
 *   rankings.jsonl     per-query top candidates with explanation paths
 * The model must have been trained with embedding tables matching the
 * dataset's entity and relation counts. */
polo_status polo_evaluate(const polo_dataset* d, const polo_ruleset* r, const polo_model* m,
                          const polo_settings* s, const char* out_dir);

/* Top-k target predictions for one source entity, rendered as text: one
 * line per prediction with its score and best explanation path. k = 0
 * yields an empty string. Unknown entity: POLO_USAGE_ERROR. */
polo_status polo_predict(const polo_dataset* d, const polo_ruleset* r, const polo_model* m,
                         const polo_settings* s, const char* source_entity, int top_k,
                         char** out_text);

#ifdef __cplusplus
}
#endif

#endif /* POLO_POLO_H */
