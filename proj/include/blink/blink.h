/* C API for the blink link-LDP pipeline.
 *
 * All functions return a status code (BLINK_OK on success); the failure
 * message for the most recent error on the calling thread is available via
 * blink_last_error(). Objects are opaque handles owned by the caller and
 * released with the matching _free function.
 */
#ifndef BLINK_H
#define BLINK_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

enum {
  BLINK_OK = 0,
  BLINK_ERR_CONFIG = 2, /* invalid parameters or configuration */
  BLINK_ERR_DATA = 3,   /* missing/malformed files or datasets */
  BLINK_ERR_NUMERIC = 4 /* numeric failure (divergence, non-finite values) */
};

typedef struct blink_graph blink_graph;
typedef struct blink_messages blink_messages;
typedef struct blink_posterior blink_posterior;
typedef struct blink_estimate blink_estimate;
typedef struct blink_model blink_model;

const char* blink_last_error(void);
const char* blink_version(void);

/* ---- graphs ---------------------------------------------------------- */

typedef struct blink_graph_info {
  size_t n;
  size_t feature_dim;
  size_t class_count;
  size_t edge_count;
} blink_graph_info;

typedef struct blink_load_report {
  size_t content_rows;
  size_t cite_lines;
  size_t skipped_unknown_ids;
  size_t dropped_self_citations;
  size_t dropped_duplicate_pairs;
} blink_load_report;

/* Plain-text citation format: content rows "<id> <features...> <label>",
 * cites rows "<target> <source>". `report` may be NULL. */
int blink_graph_load_content(const char* content_path, const char* cites_path,
                             blink_load_report* report, blink_graph** out);
int blink_graph_load_cache(const char* dir, blink_graph** out);
int blink_graph_save_cache(const blink_graph* g, const char* dir);
/* Edge (i,j) present independently with probability sigmoid(beta_i+beta_j). */
int blink_graph_sample_beta_model(const double* beta, size_t n, uint64_t seed, blink_graph** out);
int blink_graph_info_get(const blink_graph* g, blink_graph_info* out);
void blink_graph_free(blink_graph* g);

/* ---- node-side randomizer -------------------------------------------- */

/* Runs the per-node mechanism on every node: randomized response on the
 * adjacency row with budget (1-delta)*epsilon, Laplace noise with budget
 * delta*epsilon on the degree. delta == 0 disables the degree channel. */
int blink_perturb(const blink_graph* g, double epsilon, double delta, uint64_t seed,
                  blink_messages** out);
int blink_messages_save(const blink_messages* m, const char* path);
int blink_messages_load(const char* path, blink_messages** out);
int blink_messages_info(const blink_messages* m, size_t* n, double* epsilon, double* delta,
                        uint64_t* seed);
void blink_messages_free(blink_messages* m);

/* ---- server-side denoiser -------------------------------------------- */

enum {
  BLINK_ABLATION_FULL = 0,
  BLINK_ABLATION_PRIOR_ONLY = 1,
  BLINK_ABLATION_EVIDENCE_ONLY = 2
};

typedef struct blink_posterior_info {
  size_t n;
  int converged;
  size_t iterations;
  double residual;
  double flip_prob;
} blink_posterior_info;

/* Clips degrees into [1,n-2], fits the degree-model prior by fixed-point
 * iteration and combines it with the bit evidence via Bayes rule. */
int blink_denoise(const blink_messages* m, double tolerance, size_t max_iters, int ablation,
                  blink_posterior** out);
int blink_posterior_save(const blink_posterior* p, const char* path);
int blink_posterior_load(const char* path, blink_posterior** out);
/* Raw row-major n*n float64 matrix. */
int blink_posterior_export_dense(const blink_posterior* p, const char* path);
int blink_posterior_info_get(const blink_posterior* p, blink_posterior_info* out);
int blink_posterior_entry(const blink_posterior* p, size_t i, size_t j, double* out);
void blink_posterior_free(blink_posterior* p);

/* ---- graph reconstruction -------------------------------------------- */

enum {
  BLINK_VARIANT_HARD = 0,  /* keep links with posterior > 0.5 */
  BLINK_VARIANT_SOFT = 1,  /* posterior entries as edge weights */
  BLINK_VARIANT_HYBRID = 2 /* top round(|P|_1/2) pairs keep their weights */
};

int blink_reconstruct(const blink_posterior* p, int variant, blink_estimate** out);
int blink_baseline_rr(const blink_messages* m, blink_estimate** out);
int blink_baseline_symrr(const blink_graph* g, double epsilon, uint64_t seed,
                         blink_estimate** out);
int blink_baseline_ldpgcn(const blink_graph* g, double epsilon, uint64_t seed,
                          blink_estimate** out);
int blink_baseline_dprr(const blink_messages* m, uint64_t seed, blink_estimate** out);
/* kind: 0 = binary, 1 = weighted. */
int blink_estimate_info(const blink_estimate* e, size_t* n, int* kind, double* l1_norm);
int blink_estimate_save(const blink_estimate* e, const char* dir);
int blink_estimate_load(const char* dir, blink_estimate** out);
void blink_estimate_free(blink_estimate* e);

/* ---- GNN training ----------------------------------------------------- */

typedef struct blink_model_config {
  int hidden;          /* default 16 */
  double dropout;      /* in [0,1) */
  double learning_rate;
  double weight_decay;
  int epochs;
  uint64_t seed;
  int row_normalize;   /* L1-normalize feature rows before training */
} blink_model_config;

void blink_model_config_default(blink_model_config* out);

typedef struct blink_train_metrics {
  double test_accuracy;
  double best_val_accuracy;
  int best_epoch;
} blink_train_metrics;

/* Two-layer GCN over the estimated graph (est != NULL), the ground-truth
 * graph (est == NULL, use_links != 0) or no links at all (MLP). Nodes are
 * split 2:1:1 into train/val/test from split_seed. `metrics` may be NULL. */
int blink_train(const blink_graph* g, const blink_estimate* est, int use_links,
                uint64_t split_seed, const blink_model_config* config, blink_train_metrics* metrics,
                blink_model** out);
int blink_model_save(const blink_model* m, const char* path);
int blink_model_history_csv(const blink_model* m, const char* path);
/* set: 0 = train, 1 = val, 2 = test. Inputs must match the training call. */
int blink_evaluate(const blink_model* m, const blink_graph* g, const blink_estimate* est,
                   int use_links, uint64_t split_seed, int set, double* accuracy);
void blink_model_free(blink_model* m);

/* ---- metrics ----------------------------------------------------------- */

int blink_mae_estimate(const blink_estimate* e, const blink_graph* g, double* l1, double* mae);
int blink_mae_posterior(const blink_posterior* p, const blink_graph* g, double* l1, double* mae);
/* 2*|A|_1 + n/(2*epsilon_d) */
int blink_mae_bound(const blink_graph* g, double epsilon_d, double* bound);

/* ---- experiment harness ------------------------------------------------ */

/* Runs the sweep described by the JSON config (see README for the schema)
 * and writes runs.csv + summary.json into the configured output directory. */
int blink_sweep_run(const char* config_json);
/* Re-aggregates an existing runs.csv into a summary JSON. */
int blink_report(const char* runs_csv_path, const char* summary_json_path);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* BLINK_H */
