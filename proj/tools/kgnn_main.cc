#include <iostream>

#include "kgnn/cli.h"

int main(int argc, char** argv) { return kgnn::RunCli(argc, argv, std::cout, std::cerr); }
