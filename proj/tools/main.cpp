#include "plasticnn/cli.hpp"

int main(int argc, char** argv) { return plasticnn::cli_dispatch(argc, argv); }
