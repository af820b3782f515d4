#include <math.h>
#include <stdio.h>
#include <string.h>

#include "rkl.h"

#define CHECK(cond)                                                      \
    do {                                                                 \
        if (!(cond)) {                                                   \
            char msg[256];                                               \
            rkl_last_error_message(msg, sizeof msg);                     \
            fprintf(stderr, "%s:%d: %s (%s)\n", __FILE__, __LINE__,      \
                    #cond, msg);                                         \
            return 1;                                                    \
        }                                                                \
    } while (0)

int main(void) {
    double v = 0.0, err = -1.0;
    CHECK(rkl_bessel_k(0.5, 1.0, &v, &err) == RKL_STATUS_OK);
    CHECK(fabs(v - 0.46106850444789460) < 1e-12 && err >= 0.0);
    CHECK(rkl_subordination_g(1.0, &v) == RKL_STATUS_OK);
    CHECK(fabs(v - atan(0.5)) < 1e-14);
    CHECK(rkl_kernel_t(RKL_FAMILY_M1, 0, 0.5, 0.0, 0.0, &v, NULL) == RKL_STATUS_OK);
    CHECK(fabs(v - 0.5 * (1.0 - exp(-2.0))) < 1e-12);

    CHECK(rkl_bessel_k(-1.0, 1.0, &v, NULL) == RKL_STATUS_INVALID_ARGUMENT);
    CHECK(rkl_last_error_message(NULL, 0) > 0);
    CHECK(rkl_bessel_j(1.0, 1.0, NULL, NULL) == RKL_STATUS_NULL_POINTER);

    RklGrid *grid = NULL;
    RklOperator *op = NULL;
    RklWeight *w = NULL;
    size_t dim = 0;
    CHECK(rkl_grid_new(-6.0, 3.0, 91, &grid) == RKL_STATUS_OK);
    CHECK(rkl_operator_resolvent(1.0, 0.3, grid, &op) == RKL_STATUS_OK);
    CHECK(rkl_operator_dim(op, &dim) == RKL_STATUS_OK && dim == 91);
    CHECK(rkl_weight_new("power:a=0.3:center=0", grid, &w) == RKL_STATUS_OK);
    double a2 = 0.0, norm = 0.0, plain = 0.0;
    CHECK(rkl_weight_a2(w, &a2) == RKL_STATUS_OK && a2 >= 1.0);
    CHECK(rkl_operator_weighted_norm(op, w, &norm) == RKL_STATUS_OK && norm > 0.0);
    CHECK(rkl_operator_spectral_norm(op, &plain) == RKL_STATUS_OK && plain > 0.0);
    rkl_weight_free(w);
    rkl_operator_free(op);
    rkl_grid_free(grid);
    rkl_grid_free(NULL);

    printf("ok %s\n", rkl_version());
    return 0;
}
