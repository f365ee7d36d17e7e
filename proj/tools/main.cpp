#include "distill/cli.hpp"

int main(int argc, char** argv) {
    return distill::run_cli(argc, argv);
}
