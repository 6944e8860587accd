#include "wordgan/cli.hpp"

int main(int argc, char** argv) { return wordgan::run_cli(argc, argv); }
