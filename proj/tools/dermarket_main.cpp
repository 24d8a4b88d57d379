#include <iostream>

#include "dermarket/cli.hpp"

int main(int argc, char** argv) { return dermarket::cli::dispatch(argc, argv, std::cout, std::cerr); }
