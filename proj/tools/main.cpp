#include "kappaforge/cli.hpp"

int main(int argc, char** argv) {
    return kappaforge::run_cli(argc, argv);
}
