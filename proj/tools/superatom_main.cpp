#include "superatom/run_config.hpp"

int main(int argc, char** argv) { return superatom::run_cli(argc, argv); }
