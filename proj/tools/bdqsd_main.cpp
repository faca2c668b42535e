#include "bdqsd/cli.hpp"

int main(int argc, char** argv) { return bdqsd::dispatch(argc, argv); }
