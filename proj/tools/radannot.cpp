// Command-line front end; all the work lives in the pipeline header so
// the tests can drive the same code in-process.

#include <radannot/pipeline.hpp>

#include <iostream>
#include <string>
#include <vector>

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return radannot::cli::run(std::move(args), std::cout, std::cerr);
}
