#include <math.h>
#include <stdio.h>
#include "eprlab.h"

int main(void) {
    EprDenseCoder *dc = NULL;
    if (eprlab_dense_new(2, &dc) != EPR_STATUS_OK) return 1;
    for (size_t m = 0; m < 16; m++) {
        size_t out = 99;
        if (eprlab_dense_roundtrip(dc, m, &out, NULL) != EPR_STATUS_OK || out != m) return 2;
    }
    eprlab_dense_free(dc);

    EprTeleporter *tp = NULL;
    if (eprlab_teleporter_new(2, &tp) != EPR_STATUS_OK) return 3;
    double re[4] = {0.5, 0.5, 0.5, 0.1}, im[4] = {0.0, 0.3, -0.2, 0.0};
    double norm = 0;
    for (int i = 0; i < 4; i++) norm += re[i] * re[i] + im[i] * im[i];
    for (int i = 0; i < 4; i++) { re[i] /= sqrt(norm); im[i] /= sqrt(norm); }
    EprLabel lab;
    double fid = 0;
    if (eprlab_teleport(tp, re, im, 4, 9, &lab, &fid, NULL, NULL) != EPR_STATUS_OK) return 4;
    if (fabs(fid - 1.0) > 1e-10) return 5;
    eprlab_teleporter_free(tp);

    if (eprlab_dense_new(3, &dc) != EPR_STATUS_CAPABILITY) return 6;
    char buf[256];
    if (eprlab_last_error(buf, sizeof buf) == 0) return 7;
    printf("ok %s\n", buf);
    return 0;
}
