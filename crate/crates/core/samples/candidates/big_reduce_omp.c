    {
        double acc = 0.0;
        #pragma omp parallel for reduction(+:acc) schedule(static)
        for (long i = 0; i < N; i++) {
            double x = a[i];
            for (int k = 0; k < 24; k++)
                x = x * 0.999 + 1.0 / (1.0 + x * x);
            acc += x;
        }
        total += acc;
    }
