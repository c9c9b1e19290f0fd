#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) { return owl::cli::run(argc, argv, std::cout, std::cerr); }
