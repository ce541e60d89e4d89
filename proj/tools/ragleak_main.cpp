#include <string>
#include <vector>

#include "ragleak/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return ragleak::cli::run(args);
}
