#include <string>
#include <vector>

#include "instrexp/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return instrexp::cli::run(args);
}
