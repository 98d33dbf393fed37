#include "rura/cli.hpp"

int main(int argc, char** argv) { return rura::cli::run(argc, argv); }
