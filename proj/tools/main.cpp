#include "vrstc/cli.hpp"

int main(int argc, char** argv) { return vrstc::cli::dispatch(argc, argv); }
