#include <iostream>
#include <string>
#include <vector>

#include "sdec/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return sdec::cli::run(args, std::cout, std::cerr);
}
