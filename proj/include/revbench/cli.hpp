#pragma once

#include <iosfwd>

#include "revbench/error.hpp"

namespace revbench::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitJudge = 3;
inline constexpr int kExitInternal = 4;

/// Exit status for an error; `judge_phase` marks errors raised while the
/// judge was answering.
int exit_code(ErrorCode code, bool judge_phase);

/// Runs the command line. Reports go to `out`, notices and errors to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace revbench::cli
