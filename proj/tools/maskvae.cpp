#include <iostream>

#include "maskvae/cli.hpp"

int main(int argc, char** argv) { return maskvae::run_cli(argc, argv, std::cout, std::cerr); }
