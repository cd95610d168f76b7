#include <stdio.h>

#define R 64
#define C 512

double m[R][C];
double rowsum[R];
double total;

int main(void)
{
    for (int i = 0; i < R; i++)
        for (int j = 0; j < C; j++)
            m[i][j] = ((i * 131 + j * 7) % 1000) / 250.0 - 2.0;

#pragma experimental section start id=row_sums
    for (int i = 0; i < R; i++) {
        double s = 0.0;
        for (int j = 0; j < C; j++)
            s += m[i][j] * m[i][j];
        rowsum[i] = s;
        total += s;
    }
#pragma experimental section stop

    printf("%f %f\n", rowsum[5], total);
    return 0;
}
