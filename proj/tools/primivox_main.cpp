#include "primivox/pipeline.hpp"

int main(int argc, char** argv) { return primivox::cli_main(argc, argv); }
