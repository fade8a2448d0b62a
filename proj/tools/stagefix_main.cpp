#include "stagefix/cli.hpp"

int main(int argc, char** argv) { return stagefix::cli::main(argc, argv); }
