#include <iostream>
#include <string>
#include <vector>

#include "ztnc/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ztnc::cli::run(args, std::cout, std::cerr);
}
