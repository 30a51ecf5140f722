#include <iostream>

#include "flick/cli.hpp"

int main(int argc, char** argv) { return flick::cli::run(argc, argv, std::cout, std::cerr); }
