#include "condcop/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return condcop::cli::run(argc, argv, std::cout, std::cerr); }
