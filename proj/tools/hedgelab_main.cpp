#include <cstdio>

int main() {
    std::puts("hedgelab: subcommands not wired yet");
    return 0;
}
