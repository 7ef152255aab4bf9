#include <iostream>

#include "revbench/cli.hpp"

int main(int argc, char** argv) { return revbench::cli::run(argc, argv, std::cout, std::cerr); }
