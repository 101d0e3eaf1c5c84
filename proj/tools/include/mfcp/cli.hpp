#pragma once

#include <iosfwd>

namespace mfcp::cli {

/// Parses the command line and runs one pipeline command. Returns the
/// process exit code: 0 success, 2 validation error, 3 numeric failure,
/// 1 anything else.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mfcp::cli
