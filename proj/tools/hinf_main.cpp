#include "hinf/runner.hpp"

int main(int argc, char** argv) { return hinf::run_cli(argc, argv); }
