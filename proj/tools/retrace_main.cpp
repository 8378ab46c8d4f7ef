#include "retrace/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return retrace::cli::run(argc, argv, std::cout, std::cerr); }
