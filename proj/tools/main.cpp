#include "warpcone/cli.hpp"

int main(int argc, char** argv) { return warpcone::cli::run(argc, argv); }
