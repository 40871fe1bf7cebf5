#include <iostream>

#include "linc/cli.hpp"

int main(int argc, char** argv) { return linc::run_cli(argc, argv, std::cout, std::cerr); }
