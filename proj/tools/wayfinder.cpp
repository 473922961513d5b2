#include <iostream>

#include "wayfinder/cli.hpp"

int main(int argc, char** argv) { return wayfinder::run_cli(argc, argv, std::cout, std::cerr); }
