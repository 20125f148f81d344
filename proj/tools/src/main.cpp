#include <iostream>

#include "wallresp_cli/cli.hpp"

int main(int argc, char** argv) { return wallresp::cli::run(argc, argv, std::cout, std::cerr); }
