#include "cli.hpp"

int main(int argc, char** argv) { return scoremix::cli::run(argc, argv); }
