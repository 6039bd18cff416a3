#include "symcere/cli.hpp"

int main(int argc, char** argv) { return symcere::cli::dispatch(argc, argv); }
