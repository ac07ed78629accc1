#pragma once

#include <iosfwd>

#include "clc/error.hpp"

namespace clc {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int check_failed = 1;
inline constexpr int usage = 2;
inline constexpr int parse = 3;
inline constexpr int shape = 4;
inline constexpr int missing_embedding = 5;
inline constexpr int empty_corpus = 6;
inline constexpr int invalid_input = 7;
inline constexpr int io = 8;
inline constexpr int numeric = 9;
} // namespace exit_code

int exit_code_for(ErrorKind kind);

// Entry point of the clc binary. Reports go to `out`, diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace clc
