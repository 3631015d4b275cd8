#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "cbmap.h"

#define N_PER 50
#define N (4 * N_PER)

static int fail(const char *what, CbmapStatus status) {
    const char *msg = cbmap_last_error_message();
    fprintf(stderr, "%s failed with status %d: %s\n", what, (int)status, msg ? msg : "(no message)");
    return 1;
}

int main(void) {
    double data[N * 3];
    size_t labels[N];
    srand(7);
    for (size_t i = 0; i < N; i++) {
        size_t c = i / N_PER;
        labels[i] = c;
        data[3 * i + 0] = 10.0 * (double)(c % 2) + (double)rand() / RAND_MAX;
        data[3 * i + 1] = 10.0 * (double)(c / 2) + (double)rand() / RAND_MAX;
        data[3 * i + 2] = (double)rand() / RAND_MAX;
    }

    CbmapFitOptions opts = cbmap_fit_options_default(8);
    opts.max_iter = 100;
    opts.seed = 3;
    CbmapFit *fit = NULL;
    CbmapStatus status = cbmap_fit(data, N, 3, &opts, &fit);
    if (status != CBMAP_STATUS_OK) return fail("cbmap_fit", status);

    size_t rows = 0, cols = 0;
    cbmap_fit_shape(fit, &rows, &cols);
    if (rows != N || cols != 2) return fail("cbmap_fit_shape", CBMAP_STATUS_OK);

    double y[N * 2];
    status = cbmap_fit_embedding(fit, y, N * 2);
    if (status != CBMAP_STATUS_OK) return fail("cbmap_fit_embedding", status);

    double acc = 0.0;
    status = cbmap_knn_accuracy(y, N, 2, labels, 3, 0, &acc);
    if (status != CBMAP_STATUS_OK) return fail("cbmap_knn_accuracy", status);

    CbmapModel *model = NULL;
    cbmap_fit_model(fit, &model);
    double small[2 * 2];
    status = cbmap_model_transform(model, data, 2, 2, 10, 0, small, 4);
    if (status != CBMAP_STATUS_DIMENSION_MISMATCH) return fail("wrong-width transform", status);

    printf("version=%s acc=%.4f\n", cbmap_version(), acc);
    cbmap_model_free(model);
    cbmap_fit_free(fit);
    return acc >= 0.95 ? 0 : 1;
}
