// SPDX-License-Identifier: Apache-2.0
#include "bat/cli.hpp"

int main(int argc, char** argv) { return bat::cli::run(argc, argv); }
