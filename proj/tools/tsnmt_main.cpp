#include <iostream>

#include "tsnmt/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return tsnmt::run_cli(args, std::cout, std::cerr);
}
