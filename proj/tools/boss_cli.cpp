#include "boss/harness.hpp"

int main(int argc, char** argv) {
    return boss::cli_main(argc, argv);
}
