#include <iostream>

#include "uiscout/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return uiscout::run_cli(args, std::cout, std::cerr);
}
