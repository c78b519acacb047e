#include "ccmdp/harness.hpp"

int main(int argc, char** argv) { return ccmdp::cli_run(argc, argv); }
