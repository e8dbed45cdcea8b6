#include "vlcest/cli.hpp"

int main(int argc, char** argv) { return vlcest::cli_main(argc, argv); }
