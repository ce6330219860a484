#include "ofdmtoa/cli.hpp"

int main(int argc, char** argv) { return ofdmtoa::run_cli(argc, argv); }
