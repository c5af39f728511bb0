#include <iostream>

#include "sommab/cli.hpp"

int main(int argc, char** argv) { return sommab::cli::main(argc, argv, std::cout, std::cerr); }
