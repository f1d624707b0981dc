#include <vector>
#include <string>

#include "ratekit/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return ratekit::cli::run(args);
}
