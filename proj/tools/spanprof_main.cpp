#include "spanprof/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return spanprof::run_cli(argc, argv, std::cout, std::cerr); }
