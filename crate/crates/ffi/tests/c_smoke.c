#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "bsg.h"

#define CHECK(call)                                                            \
    do {                                                                       \
        BsgStatus s_ = (call);                                                 \
        if (s_ != BSG_STATUS_OK) {                                             \
            const char *m_ = bsg_last_error_message();                         \
            fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_, m_ ? m_ : "?"); \
            return 1;                                                          \
        }                                                                      \
    } while (0)

int main(void) {
    BsgSbmConfig sbm = bsg_sbm_config_fixture(1);
    BsgGraph *graph = NULL;
    CHECK(bsg_graph_generate_sbm(&sbm, &graph));

    BsgTrainConfig cfg = bsg_train_config_default();
    cfg.hidden = 16;
    cfg.emb_dim = 8;
    cfg.epochs = 5;
    BsgEmbeddings *emb = NULL;
    CHECK(bsg_train(graph, &cfg, &emb));

    size_t rows = 0, cols = 0;
    CHECK(bsg_embeddings_shape(emb, &rows, &cols));
    double *buf = malloc(rows * cols * sizeof(double));
    CHECK(bsg_embeddings_copy(emb, buf, rows * cols));

    double delta = -1.0;
    CHECK(bsg_smoothness(graph, emb, &delta));

    double scores[4] = {0.9, 0.8, 0.3, 0.1};
    uint8_t labels[4] = {1, 0, 1, 0};
    BsgRankMetrics rm;
    CHECK(bsg_rank_metrics(scores, labels, 4, &rm));

    if (bsg_mi_from_mse(0.0, 4, &delta) == BSG_STATUS_OK || bsg_last_error_message() == NULL) {
        fprintf(stderr, "mse 0 should fail with a message\n");
        return 1;
    }

    printf("%zu %zu %.1f\n", rows, cols, rm.auc);
    free(buf);
    bsg_embeddings_free(emb);
    bsg_graph_free(graph);
    return 0;
}
