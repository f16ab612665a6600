#include <string>
#include <vector>

#include "unisoft/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return unisoft::run_cli(args);
}
