#include <cstdio>

int main() {
    std::puts("comanifold: not wired up yet");
    return 2;
}
