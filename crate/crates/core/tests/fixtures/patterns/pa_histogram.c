/* expect: PO;PA */
#pragma omp parallel for reduction(+:hist[0:16])
for (i = 0; i < n; i++)
    hist[key[i] & 15] += 1;
