#include "cli.hpp"

int main(int argc, char** argv) { return cropmon::cli::run(argc, argv); }
