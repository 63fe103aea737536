#include "gtdetect/cli.hpp"

int main(int argc, char** argv) { return gtdetect::cli::run_cli(argc, argv); }
