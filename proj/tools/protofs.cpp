#include "protofs/app/cli.hpp"

int main(int argc, char** argv) { return protofs::app::run_cli(argc, argv); }
