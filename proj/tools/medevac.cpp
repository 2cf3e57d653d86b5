#include "medevac/cli.hpp"

int main(int argc, char** argv) { return medevac::cli::run(argc, argv); }
