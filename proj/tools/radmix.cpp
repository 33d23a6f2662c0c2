#include "radmix/cli.hpp"

int main(int argc, char** argv) { return radmix::cli::dispatch(argc, argv); }
