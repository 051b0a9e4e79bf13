#include <iostream>

#include "growthld/cli.hpp"

int main(int argc, char** argv) { return growthld::cli::run(argc, argv, std::cout, std::cerr); }
