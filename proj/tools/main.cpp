#include <iostream>

#include "aesthetic/cli/commands.hpp"

int main(int argc, char** argv) { return aesthetic::cli::run(argc, argv, std::cout, std::cerr); }
