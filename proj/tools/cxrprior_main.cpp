#include <iostream>
#include <string>
#include <vector>

#include "cxrprior/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return cxrprior::run(args, std::cout, std::cerr);
}
