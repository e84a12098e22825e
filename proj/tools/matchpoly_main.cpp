#include "matchpoly/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return matchpoly::cli::run(argc, argv, std::cout, std::cerr);
}
