#include "editer/cli.hpp"

int main(int argc, char** argv) { return editer::run_cli(argc, argv); }
