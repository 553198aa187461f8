#include <iostream>

#include "gridpass/cli.hpp"

int main(int argc, char** argv) { return gridpass::run_cli(argc, argv, std::cout, std::cerr); }
