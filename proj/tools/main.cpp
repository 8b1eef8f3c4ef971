#include "saldist/cli.hpp"

int main(int argc, char** argv) {
  return saldist::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
