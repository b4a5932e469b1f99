#include "tsk/cli.hpp"

int main(int argc, char** argv) { return tsk::run_cli(argc, argv); }
