/* cc smoke.c -I../../include -L../../../../target/release -l:libcodim2_ffi.a -lm -lpthread -ldl */
#include <stdio.h>
#include "codim2.h"

int main(void) {
    Codim2Atlas *atlas = NULL;
    char msg[256];
    if (codim2_atlas_new("{\"example\": \"cylinder-quotient\"}", &atlas) != CODIM2_STATUS_OK) {
        codim2_last_error_message(msg, sizeof msg);
        fprintf(stderr, "atlas: %s\n", msg);
        return 1;
    }
    double u[3] = {0.3, 0.4, 1.0}, g = 0.0;
    Codim2PointClass c;
    if (codim2_gauss_residual(atlas, 0, u, 3, &g) != CODIM2_STATUS_OK ||
        codim2_classify(atlas, 0, u, 3, 0.0, &c) != CODIM2_STATUS_OK) {
        codim2_last_error_message(msg, sizeof msg);
        fprintf(stderr, "point: %s\n", msg);
        codim2_atlas_free(atlas);
        return 1;
    }
    printf("codim2 %s: gauss residual %.3e, stratum kind %d index %zu\n", codim2_version(), g, (int)c.kind, c.index);
    codim2_atlas_free(atlas);
    return 0;
}
