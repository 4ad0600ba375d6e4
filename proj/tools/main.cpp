#include "hyperl/cli.hpp"

int main(int argc, char** argv) { return hyperl::parse_and_dispatch(argc, argv); }
