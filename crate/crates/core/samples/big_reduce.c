#include <stdio.h>

#define N (1 << 20)

double a[N];
double total;

int main(void)
{
    for (long i = 0; i < N; i++)
        a[i] = (double)(i % 1000) / 1000.0;

#pragma experimental section start id=big_reduce
    {
        double acc = 0.0;
        for (long i = 0; i < N; i++) {
            double x = a[i];
            for (int k = 0; k < 24; k++)
                x = x * 0.999 + 1.0 / (1.0 + x * x);
            acc += x;
        }
        total += acc;
    }
#pragma experimental section stop

    printf("%.6f\n", total);
    return 0;
}
