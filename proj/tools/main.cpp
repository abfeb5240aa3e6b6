#include "renfdi/cli.hpp"

int main(int argc, char** argv) { return renfdi::cli::run(argc, argv); }
