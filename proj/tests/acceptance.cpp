// Acceptance suite: one pass/fail line per criterion. Stub for now.
#include <cstdio>

int main() {
    std::printf("acceptance: not yet implemented\n");
    return 1;
}
