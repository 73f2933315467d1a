#pragma once

#include <iosfwd>

namespace dpr::cli {

/// Parses argv and runs one subcommand. Data goes to files under --out,
/// one summary line per stage to `out`, diagnostics to `err`.
/// Returns 0, 1 (input error) or 2 (numerical failure).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dpr::cli
