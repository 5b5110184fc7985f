#include <iostream>

#include "netwm/cli.h"

int main(int argc, char** argv) {
  return netwm::cli::run_cli(argc, argv, std::cout, std::cerr);
}
