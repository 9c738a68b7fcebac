#include "ust3d/cli.hpp"

int main(int argc, char** argv) { return ust3d::cli_main(argc, argv); }
