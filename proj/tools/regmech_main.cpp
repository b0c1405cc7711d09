#include "regmech/cli.hpp"

int main(int argc, char** argv) { return regmech::cli::run(argc, argv); }
