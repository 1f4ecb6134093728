#include <iostream>

#include "tepcvsr/cli.hpp"

int main(int argc, char** argv) { return tepcvsr::run_cli(argc, argv, std::cout, std::cerr); }
