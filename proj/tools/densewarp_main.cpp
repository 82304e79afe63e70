#include <string>
#include <vector>

#include "densewarp/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return densewarp::cli::run(args);
}
