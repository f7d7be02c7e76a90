#include <iostream>

#include "halfline/cli.hpp"

int main(int argc, char** argv) { return halfline::run_cli(argc, argv, std::cout, std::cerr); }
