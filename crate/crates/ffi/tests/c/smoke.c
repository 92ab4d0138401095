#include <math.h>
#include <stdio.h>

#include "carnot.h"

int main(void) {
    CarnotGroupHandle *g = NULL;
    if (carnot_group_new("heisenberg1", &g) != CARNOT_STATUS_OK) return 1;
    double x[3] = {1.0, 0.0, 0.0}, y[3] = {0.0, 1.0, 0.0}, z[3];
    if (carnot_group_compose(g, x, y, 3, z) != CARNOT_STATUS_OK) return 2;
    if (fabs(z[2] - 0.5) > 1e-15) return 3;
    if (carnot_group_compose(g, x, y, 2, z) != CARNOT_STATUS_DIMENSION_MISMATCH) return 4;
    char msg[128];
    if (carnot_last_error(msg, sizeof msg) == 0) return 5;
    carnot_group_free(g);
    printf("ok %s\n", carnot_version());
    return 0;
}
