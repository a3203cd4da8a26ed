#include "bowslab/cli.hpp"

int main(int argc, char** argv) { return bowslab::cli::main_entry(argc, argv); }
