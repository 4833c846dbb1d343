#include <iostream>

#include "kbforge/cli.hpp"

int main(int argc, char** argv) {
  return kbforge::run_cli(argc, argv, std::cout, std::cerr);
}
