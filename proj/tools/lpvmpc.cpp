#include "lpvmpc/io.hpp"

int main(int argc, char** argv) { return lpvmpc::run(argc, argv); }
