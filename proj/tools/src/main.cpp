#include "uaplab/cli.hpp"

int main(int argc, char** argv) { return uaplab::cli::main(argc, argv); }
