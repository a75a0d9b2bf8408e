#include "cli.hpp"

int main(int argc, char** argv) { return qlwave::cli::main_entry(argc, argv); }
