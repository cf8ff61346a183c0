#pragma once

#include <cstddef>
#include <functional>

namespace msde {

/// Worker count used by experiment drivers. Resolution order: explicit
/// set_default_threads(n > 0), then the MSDE_THREADS environment variable,
/// then std::thread::hardware_concurrency().
[[nodiscard]] unsigned default_threads();
void set_default_threads(unsigned n);

/// Runs body(i) for i in [0, n) on up to `threads` workers (0 = default).
/// Indices are partitioned statically; callers write results into per-index
/// slots, so the outcome never depends on scheduling. The first exception
/// thrown by any body is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, unsigned threads = 0);

}  // namespace msde
