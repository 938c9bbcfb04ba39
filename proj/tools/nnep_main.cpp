#include <iostream>
#include <string>
#include <vector>

#include "nnep/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return nnep::run_cli(args, std::cout, std::cerr);
}
