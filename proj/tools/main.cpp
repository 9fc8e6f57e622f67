#include "hmdlf/cli.hpp"

int main(int argc, char** argv) { return hmdlf::run_cli(argc, argv); }
