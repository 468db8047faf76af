#include "otl/cli.hpp"

int main(int argc, char** argv) { return otl::cli_dispatch(argc, argv); }
