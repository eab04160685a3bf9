#include <iostream>

#include "embedflow/cli.hpp"

int main(int argc, char** argv) {
  return embedflow::cli::run(argc, argv, std::cout, std::cerr);
}
