#include "srfilter/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return srfilter::run_cli(argc, argv, std::cout, std::cerr); }
