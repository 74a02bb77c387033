#include "saba/cli/commands.hpp"

int main(int argc, char** argv) { return saba::cli::dispatch(argc, argv); }
