#include <iostream>

#include "charactergpt/cli.hpp"

int main(int argc, char** argv) { return charactergpt::run_cli(argc, argv, std::cin, std::cout, std::cerr); }
