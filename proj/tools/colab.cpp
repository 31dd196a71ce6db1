#include "colab/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return colab::run_cli(argc, argv, std::cout, std::cerr); }
