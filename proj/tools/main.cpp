#include "vpcd/cli/commands.hpp"

#include <iostream>

int main(int argc, char** argv) { return vpcd::cli::run(argc, argv, std::cout, std::cerr); }
