#include <string>
#include <vector>

#include "chime/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return chime::cli_main(args);
}
