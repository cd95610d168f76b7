/* expect: PO;DS */
#pragma omp parallel for schedule(dynamic)
for (i = 0; i < n; i++)
    for (j = 0; j <= i; j++)
        tri[i][j] = a[i] * a[j];
