#include "splat/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return splat::run_cli(argc, argv, std::cout, std::cerr); }
