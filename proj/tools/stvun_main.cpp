#include "stvun/cli.hpp"

int main(int argc, char** argv) { return stvun::cli::run_cli(argc, argv); }
