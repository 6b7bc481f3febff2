// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace bat::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kConfigError = 2,
  kDataError = 3,
  kNumericalAbort = 4,
};

/// Entry point of the `batm` executable. Data goes to stdout, diagnostics to stderr.
int run(int argc, char** argv);

} // namespace bat::cli
