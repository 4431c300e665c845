#include "cli.hpp"

int main(int argc, char** argv) { return mkan::cli::run_cli(argc, argv); }
