#include <iostream>
#include <string>
#include <vector>

#include "tvhazard/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return tvhazard::run_cli(args, std::cout, std::cerr);
}
