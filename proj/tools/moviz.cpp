#include "moviz/cli.hpp"

int main(int argc, char** argv) { return moviz::cli::run(argc, argv); }
