#include <iostream>
#include <string>
#include <vector>

#include "tgcmc/app/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return tgcmc::app::run_cli(args, std::cout, std::cerr);
}
