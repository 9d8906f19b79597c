#include "fairedge/cli.hpp"

int main(int argc, char** argv) { return fairedge::cli::run(argc, argv); }
