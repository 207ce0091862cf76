#include "nlrte/cli.hpp"

int main(int argc, char** argv) { return nlrte::run(argc, argv); }
