#include <string>
#include <vector>

#include "dfmt/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dfmt::cli_run(std::move(args));
}
