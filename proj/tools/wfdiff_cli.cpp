#include <iostream>

#include "wfdiff/cli.hpp"

int main(int argc, char** argv) { return wfdiff::run_cli(argc, argv, std::cout, std::cerr); }
