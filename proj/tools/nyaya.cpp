#include <iostream>

#include "nyaya/cli.hpp"

int main(int argc, char** argv) { return nyaya::cli::run(argc, argv, std::cout, std::cerr); }
