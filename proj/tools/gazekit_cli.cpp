#include <cstdio>

int main() {
    std::puts("gazekit placeholder");
    return 0;
}
