#include "cpsguard/cli.hpp"

int main(int argc, char** argv) { return cpsguard::cli_main(argc, argv); }
