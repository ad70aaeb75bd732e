#include "mtsr/cli.hpp"

int main(int argc, char** argv) { return mtsr::run_cli(argc, argv); }
