#pragma once

#include "run_config.hpp"

#include <iosfwd>

namespace dlab::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_contract = 1;    // a contract check failed
inline constexpr int exit_config = 2;      // bad flags, config or preconditions
inline constexpr int exit_numerical = 3;   // solver or eigensolver failure

// Runs a validated config; the report goes to c.output or `out`. Diagnostics go to `err`.
int run(const RunConfig& c, std::ostream& out, std::ostream& err, bool quiet = false);

// Full command line, including parsing and error mapping.
int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dlab::cli
