#include "cli_app.hpp"

int main(int argc, char** argv) { return defgrid::cli::run_cli(argc, argv); }
