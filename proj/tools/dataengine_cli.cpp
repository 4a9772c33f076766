#include <iostream>

#include "dataengine/cli.hpp"

int main(int argc, char** argv) { return dataengine::run_cli(argc, argv, std::cout, std::cerr); }
