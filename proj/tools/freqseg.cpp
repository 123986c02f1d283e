#include <iostream>
#include <string>
#include <vector>

#include "freqseg/cli/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return freqseg::cli::run(args, std::cout, std::cerr);
}
