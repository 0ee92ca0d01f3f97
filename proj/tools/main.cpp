#include "cli.hpp"

int main(int argc, char** argv) { return articnav::cli::run(argc, argv); }
