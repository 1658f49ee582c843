#include "kerbs/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return kerbs::cli::run(argc, argv, std::cout, std::cerr); }
