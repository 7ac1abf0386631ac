#include "paroc/cli.hpp"

int main(int argc, char** argv) { return paroc::run_cli(argc, argv); }
