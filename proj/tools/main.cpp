#include <iostream>
#include <string>
#include <vector>

#include "cfcscan/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cfcscan::run_cli(args, std::cout, std::cerr);
}
