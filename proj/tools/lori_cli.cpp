#include "lori/io.hpp"

int main(int argc, char** argv) { return lori::run_cli(argc, argv); }
