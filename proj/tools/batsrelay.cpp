// batsrelay: recoding and idle-time analysis for a two-hop relay where the
// sink also overhears the source.

#include <iostream>

#include "app.hpp"

int main(int argc, char** argv) { return bats::cli::run_cli(argc, argv, std::cout, std::cerr); }
