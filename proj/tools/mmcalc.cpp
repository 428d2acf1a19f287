#include <iostream>

#include "mmc/cli.hpp"

int main(int argc, char** argv) { return mmc::run_cli(argc, argv, std::cout, std::cerr); }
