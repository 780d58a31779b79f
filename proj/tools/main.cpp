#include "satp/cli/cli.hpp"

int main(int argc, char** argv) { return satp::cli_main(argc, argv); }
