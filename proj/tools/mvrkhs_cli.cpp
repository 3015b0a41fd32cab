#include "mvrkhs/commands.hpp"

int main(int argc, char** argv) { return mvrkhs::run_cli(argc, argv); }
