#include "rfbarrier/cli.hpp"

int main(int argc, char** argv) { return rfbarrier::cli::main(argc, argv); }
