#include <iostream>

#include "ekbound/cli.hpp"

int main(int argc, char** argv) { return ekbound::cli::run(argc, argv, std::cout, std::cerr); }
