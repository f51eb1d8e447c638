#include "ebtraffic/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return ebt::run_cli(argc, argv, std::cout, std::cerr); }
