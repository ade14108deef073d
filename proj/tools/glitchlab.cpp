#include "glitchlab/cli.hpp"

int main(int argc, char** argv) { return glitchlab::cli::run(argc, argv); }
