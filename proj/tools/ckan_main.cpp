#include "ckan/cli.hpp"

int main(int argc, char** argv) { return ckan::run_cli(argc, argv); }
