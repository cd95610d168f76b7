#include <stdio.h>

#define N 128

float u[N][N], v[N][N], w[N][N];

static float blend(float x, float y)
{
    return 0.75f * x + 0.25f * y;
}

int main(void)
{
    for (int i = 0; i < N; i++)
        for (int j = 0; j < N; j++)
            u[i][j] = (float)((i * 31 + j * 17) % 101) / 100.0f;

#pragma experimental section start id=smooth
    for (int i = 1; i < N - 1; i++)
        for (int j = 1; j < N - 1; j++)
            v[i][j] = 0.25f * (u[i - 1][j] + u[i + 1][j] + u[i][j - 1] + u[i][j + 1]);
    for (int i = 0; i < N; i++)
        for (int j = 0; j < N; j++)
            w[i][j] = blend(u[i][j], v[i][j]);
#pragma experimental section stop

    printf("%f %f\n", v[N / 2][N / 2], w[3][5]);
    return 0;
}
