#include "commands.hpp"

int main(int argc, char** argv) {
    return cecluster::cli::run(argc, argv);
}
