#include <stdio.h>

#define N 4096

double a[N];
double sum;

int main(void)
{
    for (int i = 0; i < N; i++)
        a[i] = 0.25 * (i % 97) + 1.0;
    sum = 0.0;

#pragma experimental section start id=vector_sum
    for (int i = 0; i < N; i++)
        sum += a[i] * a[i];
#pragma experimental section stop

    printf("sum = %.6f\n", sum);
    return 0;
}
