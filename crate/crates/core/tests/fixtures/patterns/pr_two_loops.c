/* expect: PR */
#pragma omp parallel
{
    #pragma omp for
    for (i = 0; i < n; i++)
        a[i] = b[i] * 2.0;
    #pragma omp for
    for (i = 0; i < n; i++)
        c[i] = a[i] + 1.0;
}
