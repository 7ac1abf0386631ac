#pragma once

namespace paroc {

/// argv-style entry point shared by the paroc binary and the CLI tests.
/// Returns the process exit code: 0 ok, 1 config or input error, 2 solver
/// failure, 3 partially valid sweep, 4 verification failure.
int run_cli(int argc, const char* const* argv);

}  // namespace paroc
