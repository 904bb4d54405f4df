#include "sldr/cli.hpp"

int main(int argc, char** argv) { return sldr::cli::run(argc, argv); }
