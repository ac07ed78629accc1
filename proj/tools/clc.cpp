#include <iostream>

#include "clc/cli.hpp"

int main(int argc, char** argv) {
    return clc::run_cli(argc, argv, std::cout, std::cerr);
}
