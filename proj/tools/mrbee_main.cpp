#include "mrbee/cli.hpp"

int main(int argc, char** argv) { return mrbee::cli::run(argc, argv); }
