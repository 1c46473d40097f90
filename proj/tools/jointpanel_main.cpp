#include <iostream>
#include <string>
#include <vector>

#include "jointpanel/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return jointpanel::cli::run(args, std::cout, std::cerr);
}
