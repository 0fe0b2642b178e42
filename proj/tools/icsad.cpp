#include <iostream>
#include <string>
#include <vector>

#include "icsad/cli.hpp"

int main(int argc, char** argv) {
  return icsad::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
