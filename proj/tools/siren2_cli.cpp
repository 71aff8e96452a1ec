#include <string>
#include <vector>

#include "siren2/cli.hpp"

int main(int argc, char** argv) {
  return siren2::cli::main_entry(std::vector<std::string>(argv, argv + argc));
}
