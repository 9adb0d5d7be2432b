#include "cli.hpp"

int main(int argc, char** argv) { return wfpd::cli::run(argc, argv); }
