#ifndef BSG_H
#define BSG_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum BsgPretext {
  BSG_PRETEXT_EDGE_RECON = 0,
  BSG_PRETEXT_FEATURE_RECON = 1,
} BsgPretext;

/**
 * Result code of every fallible call.
 */
typedef enum BsgStatus {
  BSG_STATUS_OK = 0,
  BSG_STATUS_NULL_POINTER = 1,
  BSG_STATUS_INVALID_ARGUMENT = 2,
  BSG_STATUS_IO = 3,
  BSG_STATUS_PARSE = 4,
  BSG_STATUS_DIMENSION_MISMATCH = 5,
  BSG_STATUS_NON_FINITE = 6,
  BSG_STATUS_INFEASIBLE = 7,
  BSG_STATUS_RUNTIME = 8,
  BSG_STATUS_PANIC = 9,
} BsgStatus;

/**
 * A dense row-major `rows × cols` embedding matrix.
 */
typedef struct BsgEmbeddings BsgEmbeddings;

/**
 * A graph with node features and optional labels.
 */
typedef struct BsgGraph BsgGraph;

typedef struct BsgSbmConfig {
  size_t blocks;
  size_t nodes_per_block;
  double p_in;
  double p_out;
  size_t feature_dim;
  double feature_noise;
  uint64_t seed;
} BsgSbmConfig;

typedef struct BsgTrainConfig {
  double mask_ratio;
  double lambda1;
  double lambda2;
  double lambda3;
  double margin;
  double learning_rate;
  double weight_decay;
  size_t epochs;
  size_t hidden;
  size_t emb_dim;
  size_t decoder_hidden;
  uint64_t seed;
  enum BsgPretext pretext;
} BsgTrainConfig;

/**
 * Ranking quality in percent.
 */
typedef struct BsgRankMetrics {
  double auc;
  double ap;
} BsgRankMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failure on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *bsg_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *bsg_version(void);

/**
 * The two-block fixture: 100 nodes per block, p_in 0.05, p_out 0.005,
 * 16 features with unit noise.
 */
struct BsgSbmConfig bsg_sbm_config_fixture(uint64_t seed);

/**
 * Default training settings (Cora loss weights, Adam at 0.01, 500 epochs).
 */
struct BsgTrainConfig bsg_train_config_default(void);

/**
 * # Safety
 * `config` must point to a valid config and `out` to writable storage.
 */
enum BsgStatus bsg_graph_generate_sbm(const struct BsgSbmConfig *config, struct BsgGraph **out);

/**
 * Loads a graph from an edge list, a feature matrix and an optional label
 * file (`labels` may be NULL).
 *
 * # Safety
 * Paths must be NUL-terminated strings; `out` must be writable.
 */
enum BsgStatus bsg_graph_load(const char *edges,
                              const char *features,
                              const char *labels,
                              struct BsgGraph **out);

/**
 * # Safety
 * `graph` must be a live handle or NULL.
 */
size_t bsg_graph_num_nodes(const struct BsgGraph *graph);

/**
 * Number of undirected edges.
 *
 * # Safety
 * `graph` must be a live handle or NULL.
 */
size_t bsg_graph_num_edges(const struct BsgGraph *graph);

/**
 * # Safety
 * `graph` must come from this library and not be used afterwards. NULL is a no-op.
 */
void bsg_graph_free(struct BsgGraph *graph);

/**
 * Trains on `graph` and returns full-graph embeddings.
 *
 * # Safety
 * `graph` and `config` must be valid; `out` must be writable.
 */
enum BsgStatus bsg_train(const struct BsgGraph *graph,
                         const struct BsgTrainConfig *config,
                         struct BsgEmbeddings **out);

/**
 * Copies `rows × cols` row-major values into a new embedding handle.
 *
 * # Safety
 * `data` must point to `rows * cols` readable doubles.
 */
enum BsgStatus bsg_embeddings_from_data(size_t rows,
                                        size_t cols,
                                        const double *data,
                                        struct BsgEmbeddings **out);

/**
 * # Safety
 * `emb` must be valid; `rows` and `cols` must be writable.
 */
enum BsgStatus bsg_embeddings_shape(const struct BsgEmbeddings *emb, size_t *rows, size_t *cols);

/**
 * Copies the embeddings row-major into `buffer`, which must hold at least
 * `rows * cols` doubles; `len` is its capacity.
 *
 * # Safety
 * `buffer` must point to `len` writable doubles.
 */
enum BsgStatus bsg_embeddings_copy(const struct BsgEmbeddings *emb, double *buffer, size_t len);

/**
 * # Safety
 * `emb` must come from this library and not be used afterwards. NULL is a no-op.
 */
void bsg_embeddings_free(struct BsgEmbeddings *emb);

/**
 * Smoothness of `emb` over the edges of `graph`.
 *
 * # Safety
 * Handles must be valid; `out` must be writable.
 */
enum BsgStatus bsg_smoothness(const struct BsgGraph *graph,
                              const struct BsgEmbeddings *emb,
                              double *out);

/**
 * ROC-AUC and average precision of `scores` against 0/1 `labels`.
 *
 * # Safety
 * `scores` and `labels` must point to `len` readable elements.
 */
enum BsgStatus bsg_rank_metrics(const double *scores,
                                const uint8_t *labels,
                                size_t len,
                                struct BsgRankMetrics *out);

/**
 * Gaussian mutual information implied by a reconstruction MSE in `d` dimensions.
 *
 * # Safety
 * `out` must be writable.
 */
enum BsgStatus bsg_mi_from_mse(double mse, size_t d, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BSG_H */
