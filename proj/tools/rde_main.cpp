#include "rde/cli.hpp"

int main(int argc, char** argv) { return rde::cli::cli_main(argc, argv); }
