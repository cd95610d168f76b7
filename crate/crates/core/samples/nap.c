#include <stdio.h>
#include <time.h>

int ticks;

int main(void)
{
#pragma experimental section start id=nap
    {
        struct timespec ts = {0, 100000000L};
        nanosleep(&ts, NULL);
        ticks += 1;
    }
#pragma experimental section stop

    printf("%d\n", ticks);
    return 0;
}
