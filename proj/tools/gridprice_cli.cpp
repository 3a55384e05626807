#include "gridprice/cli.hpp"

int main(int argc, char **argv) { return gridprice::cli::run(argc, argv); }
