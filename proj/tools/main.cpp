#include "commands.hpp"

int main(int argc, char** argv) { return themescreen::cli::run(argc, argv); }
