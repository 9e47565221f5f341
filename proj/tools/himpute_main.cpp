#include "himpute/cli.hpp"

int main(int argc, char** argv) { return himpute::run_cli(argc, argv); }
