#include "qdgf/cli.hpp"

int main(int argc, char** argv) { return qdgf::cli::run(argc, argv); }
