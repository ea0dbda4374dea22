#include <iostream>

#include "tloho/cli.hpp"

int main(int argc, char** argv) { return tloho::cli::run(argc, argv, std::cout, std::cerr); }
