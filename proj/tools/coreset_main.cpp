#include "coreset/cli.hpp"

int main(int argc, char** argv) { return coreset::cli::run(argc, argv); }
