#include <iostream>

#include "daa/cli.hpp"

int main(int argc, char** argv) { return daa::run_cli(argc, argv, std::cout, std::cerr); }
