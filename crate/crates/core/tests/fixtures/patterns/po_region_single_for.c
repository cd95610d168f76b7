/* expect: PO */
#pragma omp parallel
{
    #pragma omp for
    for (k = 0; k < nz; k++) {
        for (j = 0; j < ny; j++) {
            for (i = 0; i < nx; i++) {
                rhs[k][j][i] = rhs[k][j][i] * dt;
            }
        }
    }
}
