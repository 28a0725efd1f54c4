#include <iostream>

#include "embseg/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return embseg::cli::run(args, std::cout, std::cerr);
}
