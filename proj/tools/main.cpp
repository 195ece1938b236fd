#include "ridgemm/cli.hpp"

int main(int argc, char** argv) { return ridgemm::cli_main(argc, argv); }
