#pragma once

#include <iosfwd>

namespace shiftbench::cli {

/// Entry point shared by the executable and the tests. Exit codes: 0 on
/// success or --help, 2 for invalid usage or configuration, 1 for runtime
/// failures (including a failed experiment).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace shiftbench::cli
