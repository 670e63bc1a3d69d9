#include "ipakit/cli.hpp"

int main(int argc, char** argv) { return ipakit::cli::run(argc, argv); }
