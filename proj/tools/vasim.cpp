#include "vasim/control/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return vasim::control::run_cli(argc, argv, std::cout, std::cerr); }
