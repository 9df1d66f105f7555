#include "rbridge/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return rbridge::run_cli(argc, argv, std::cerr); }
