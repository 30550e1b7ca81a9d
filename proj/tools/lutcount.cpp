#include <iostream>
#include <string>
#include <vector>

#include "lutcount/cli.hpp"

int main(int argc, char** argv) {
  return lutcount::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
