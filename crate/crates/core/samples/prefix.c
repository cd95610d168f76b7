#include <stdio.h>

#define N 2048

int a[N];
long b[N];

int main(void)
{
    for (int i = 0; i < N; i++)
        a[i] = (i * 7) % 13;
    b[0] = a[0];

#pragma experimental section start id=prefix
    for (int i = 1; i < N; i++)
        b[i] = b[i - 1] + a[i];
#pragma experimental section stop

    printf("%ld\n", b[N - 1]);
    return 0;
}
