#include <iostream>

#include "drpn/cli/app.hpp"

int main(int argc, char** argv) {
  return drpn::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
