#include <iostream>
#include <string>
#include <vector>

#include "clair/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return clair::run(args, std::cout, std::cerr);
}
