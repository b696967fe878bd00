#include <iostream>
#include <string>
#include <vector>

#include "riskshare/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return riskshare::cli::run(args, std::cout, std::cerr);
}
