// SPDX-License-Identifier: Apache-2.0
#include "mamac/cli.hpp"

int main(int argc, char** argv) {
    return mamac::cli::parse_and_dispatch(argc, argv);
}
