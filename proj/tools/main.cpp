#include "csipred/cli.hpp"

int main(int argc, char** argv) { return csipred::cli::run(argc, argv); }
