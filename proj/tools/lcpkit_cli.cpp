#include "lcpkit/cli.hpp"

int main(int argc, char** argv) { return lcpkit::run_cli(argc, argv); }
