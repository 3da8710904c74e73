#include <iostream>
#include <string>
#include <vector>

#include "ogcp/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ogcp::run_cli(args, std::cout, std::cerr);
}
