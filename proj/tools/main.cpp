#include "seqdet/cli.hpp"

int main(int argc, char** argv) { return seqdet::cli::main_entry(argc, argv); }
