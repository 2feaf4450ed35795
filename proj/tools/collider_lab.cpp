#include "collider_lab/cli.hpp"

int main(int argc, char** argv) { return collider_lab::run_cli(argc, argv); }
