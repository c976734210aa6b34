#pragma once

// The `tdh` command line: gen-data, train, encode, retrieve, eval and
// export-curves. `run` is the whole program minus process setup so it can be
// driven from tests.

#include <iosfwd>

namespace tdh::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,     // unexpected failure
  kUsage = 2,        // unknown flag, missing or malformed argument
  kIo = 3,           // missing or unreadable/unwritable file
  kInvalidInput = 4, // malformed file contents or an invariant violation
  kNumeric = 5,      // training produced a non-finite objective
};

// Errors are reported as one stderr line: `error: <category>: <message>`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tdh::cli
