#include <iostream>

#include "koopfr/cli.hpp"

int main(int argc, char** argv) { return koopfr::cli::run(argc, argv, std::cout, std::cerr); }
