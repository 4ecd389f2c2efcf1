#include "zsparse/cli.hpp"

int main(int argc, char** argv) { return zsp::run_cli(argc, argv); }
