#include "pouta/cli.hpp"

int main(int argc, char** argv) { return pouta::cli_dispatch(argc, argv); }
