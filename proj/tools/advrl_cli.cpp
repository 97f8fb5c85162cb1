#include <iostream>

#include "advrl/cli/cli.hpp"

int main(int argc, char** argv) { return advrl::cli::run(argc, argv, std::cout, std::cerr); }
