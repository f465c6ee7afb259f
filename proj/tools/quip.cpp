#include <iostream>

#include "quip/cli.hpp"

int main(int argc, char** argv) { return quip::run_cli(argc, argv, std::cout, std::cerr); }
