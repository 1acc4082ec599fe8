#include "cli.hpp"

int main(int argc, char** argv) { return sptc::cli::run_cli(argc, argv); }
