#include "qtgp/cli.hpp"

int main(int argc, char** argv) { return qtgp::cli::run(argc, argv); }
