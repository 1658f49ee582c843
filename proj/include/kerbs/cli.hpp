#pragma once

#include <iosfwd>

namespace kerbs::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitCheckFailed = 3;  // lemmas or grad-audit ran but did not pass

// Subcommands: train, eval, lemmas, senses, kernel-dump, grad-audit.
// Errors are reported on `err` as one line:
//   error kind=<kind> message=<text>
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace kerbs::cli
