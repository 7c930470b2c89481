#include <iostream>

#include "eidpki/enrollment/cli.hpp"

int main(int argc, char** argv) { return eidpki::enrollment::run_cli(argc, argv, std::cout, std::cerr); }
