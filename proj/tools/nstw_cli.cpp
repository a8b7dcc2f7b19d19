#include "nstw/cli/app.hpp"

int main(int argc, char** argv) { return nstw::cli::run(argc, argv); }
