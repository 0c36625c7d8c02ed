#include "shrinkrisk/cli.hpp"

int main(int argc, char** argv) { return shrinkrisk::cli::run(argc, argv); }
