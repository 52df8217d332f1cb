#include "cpforge_cli/commands.hpp"

int main(int argc, char** argv) { return cpforge::cli::run(argc, argv); }
