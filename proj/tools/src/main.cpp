#include <iostream>

#include "mfcp/cli.hpp"

int main(int argc, char** argv) { return mfcp::cli::run_cli(argc, argv, std::cout, std::cerr); }
