#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sdec::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitValidation = 2;

/// Runs the `sdec` command line. args[0] is the program name.
/// Diagnostics go to `err`; `out` receives help text and short summaries.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace sdec::cli
