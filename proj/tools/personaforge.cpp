#include "personaforge/cli.hpp"

int main(int argc, char** argv) { return personaforge::cli::run(argc, argv); }
