#include <iostream>

#include "blm/cli.hpp"

int main(int argc, char** argv) { return blm::run_cli(argc, argv, std::cout, std::cerr); }
