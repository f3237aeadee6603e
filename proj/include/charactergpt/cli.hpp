#pragma once

#include <iosfwd>

#include "charactergpt/error.hpp"

namespace charactergpt {

/// 0 success, 1 bad input or state, 2 provider failure, 3 internal error.
int exit_code(ErrorKind kind) noexcept;

/// Entry point of the `charactergpt` command. Reads chat input from `in`,
/// writes results to `out` and diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace charactergpt
