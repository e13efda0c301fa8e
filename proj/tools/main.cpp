#include "sigflow/cli.hpp"

int main(int argc, char** argv) { return sigflow::cli::run(argc, argv); }
