#include <iostream>

#include "kel/cli.hpp"

int main(int argc, char** argv) { return kel::run_cli(argc, argv, std::cout, std::cerr); }
