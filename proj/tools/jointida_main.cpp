#include <iostream>
#include <string>
#include <vector>

#include "jointida/cli.hpp"

int main(int argc, char** argv) {
  return jointida::cli::main_with(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
