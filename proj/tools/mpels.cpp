#include "mpe/cli.hpp"

int main(int argc, char** argv) { return mpe::cli_main(argc, argv); }
