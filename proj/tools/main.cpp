#include "cli.hpp"

int main(int argc, char** argv) { return vtgrasp::cli::run(argc, argv); }
