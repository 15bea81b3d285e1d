#include <iostream>
#include <string>
#include <vector>

#include "minsg/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return minsg::run_cli(args, std::cout, std::cerr);
}
