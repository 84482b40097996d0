#include "intmaps/cli.hpp"

int main(int argc, char** argv) { return intmaps::cli::run(argc, argv); }
