#include "itdre/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return itdre::cli::run(argc, argv, std::cout, std::cerr);
}
