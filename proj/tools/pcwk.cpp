#include "pcwk/cli.hpp"

int main(int argc, char** argv) { return pcwk::cli::main_entry(argc, argv); }
