#include <iostream>
#include <string>
#include <vector>

#include "reprog/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return reprog::run_cli(args, std::cout, std::cerr);
}
