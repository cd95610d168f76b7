/* expect: PO;NW */
#pragma omp parallel
{
    #pragma omp for nowait
    for (i = 0; i < n; i++)
        z[i] = x[i] - y[i];
}
