    #pragma omp parallel
    {
        #pragma omp for
        for (int i = 1; i < N - 1; i++)
            for (int j = 1; j < N - 1; j++)
                v[i][j] = 0.25f * (u[i - 1][j] + u[i + 1][j] + u[i][j - 1] + u[i][j + 1]);
        #pragma omp for
        for (int i = 0; i < N; i++)
            for (int j = 0; j < N; j++)
                w[i][j] = blend(u[i][j], v[i][j]);
    }
