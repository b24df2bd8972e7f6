#include <iostream>
#include <string>
#include <vector>

#include "countforge/cli.hpp"

int main(int argc, char** argv) {
    const std::vector<std::string> args(argv, argv + argc);
    return countforge::cli::run(args, std::cout, std::cerr);
}
