#include "cli_commands.hpp"

int main(int argc, char** argv) { return snseg::cli::run(argc, argv); }
