    #pragma omp parallel for reduction(+:total)
    for (int i = 0; i < R; i++) {
        double s = 0.0;
        for (int j = 0; j < C; j++)
            s += m[i][j] * m[i][j];
        rowsum[i] = s;
        total += s;
    }
