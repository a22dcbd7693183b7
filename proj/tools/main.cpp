#include "rkf/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return rkf::run_cli(argc, argv, std::cout, std::cerr); }
