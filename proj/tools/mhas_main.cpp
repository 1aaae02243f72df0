#include <iostream>
#include <string>
#include <vector>

#include "mhas/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return mhas::cli::run(args, std::cout, std::cerr);
}
