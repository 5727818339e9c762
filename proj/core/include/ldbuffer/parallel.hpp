#pragma once

#include <cstddef>
#include <functional>

namespace ldb {

/// Worker count: an explicit positive request wins, otherwise the
/// LDBUFFER_THREADS environment variable (0 or unset = hardware concurrency).
unsigned resolve_threads(unsigned requested = 0);

/// Runs body(i) for i in [0, count) on up to `threads` workers. Indices are
/// handed out in contiguous blocks; callers write results by index so the
/// outcome does not depend on scheduling. The first exception is rethrown.
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace ldb
