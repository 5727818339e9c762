#pragma once

#include <iosfwd>

namespace ldb::cli {

/// Entry point behind the `ldbuffer` binary. Returns 0 on success, 1 on a
/// domain error (error JSON on `err`), 2 on a usage error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ldb::cli
