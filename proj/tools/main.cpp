#include "hydroneuro/cli.hpp"

int main(int argc, char** argv) { return hydroneuro::run_cli(argc, argv); }
