#include "recon/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return recon::cli::run(argc, argv, std::cout, std::cerr); }
