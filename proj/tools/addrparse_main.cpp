#include "addrparse/cli.hpp"

int main(int argc, char** argv) { return addrparse::cli::run(argc, argv); }
