#pragma once

#include <cstddef>
#include <functional>

namespace drlyap {

/// Worker count: DR_LYAP_THREADS when set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
unsigned worker_count();

/// Calls body(i) for i in [0, n) over contiguous chunks. Each index must only
/// write its own output slot; the first exception thrown is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace drlyap
