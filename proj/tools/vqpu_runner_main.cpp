#include <cstdio>

#include "vqpu/runner.hpp"

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: vqpu-runner <run_directory>\n");
        return 2;
    }
    return vqpu::execute_run_directory(argv[1]);
}
