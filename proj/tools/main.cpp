#include <iostream>
#include <string>
#include <vector>

#include "bvlmc/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  return bvlmc::cli::run(args, std::cout, std::cerr);
}
