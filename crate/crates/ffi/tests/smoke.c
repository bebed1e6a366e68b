#include <math.h>
#include <stdio.h>

#include "ndae_ident.h"

int main(void) {
    NdaeModelHandle *model = NULL;
    if (ndae_model_synthetic(1, 3, &model) != NDAE_STATUS_OK) {
        fprintf(stderr, "%s\n", ndae_last_error());
        return 1;
    }
    size_t n_d = 0, n_a = 0, m = 0;
    ndae_model_dims(model, &n_d, &n_a, &m);

    double xd0[4] = {0.1, 0.0, 0.0, 0.0};
    double offset[2] = {0.0, 0.0};
    NdaeTrajectory *traj = NULL;
    if (ndae_simulate(model, "radau2", 0.01, 0.05, xd0, offset, NULL, NULL, 0.0, &traj) != NDAE_STATUS_OK) {
        fprintf(stderr, "%s\n", ndae_last_error());
        return 1;
    }
    size_t len = 0;
    ndae_trajectory_len(traj, &len);

    double p[4] = {4.0, 0.0, 0.0, 4.0}, w[4] = {1.0, 0.0, 0.0, 1.0}, bound = 0.0;
    ndae_prop1_bound(p, w, 2, 2.0, &bound);

    int bad = ndae_model_dims(NULL, &n_d, NULL, NULL) != NDAE_STATUS_NULL_POINTER;
    printf("%zu %zu %zu %zu %.15f %d\n", n_d, n_a, m, len, bound, bad);
    ndae_trajectory_free(traj);
    ndae_model_free(model);
    return bad || fabs(bound - sqrt(2.0)) > 1e-15;
}
