#include <iostream>
#include <string>
#include <vector>

#include "cotd/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cotd::cli::run(args, std::cout, std::cerr);
}
