#include "platform_egt/cli.hpp"

int main(int argc, char** argv) { return platform_egt::cli::run(argc, argv); }
