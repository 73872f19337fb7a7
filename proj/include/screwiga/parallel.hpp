#pragma once

#include <cstddef>
#include <functional>

namespace screwiga {

/// Worker count used by every parallel loop in the library. 0 means hardware concurrency.
void setThreadCount(int n);
int threadCount();

/// Runs body(begin, end, worker) over contiguous chunks of [0, n). Chunk boundaries depend
/// only on n and the worker count; callers that need bitwise reproducibility must reduce
/// per-chunk results in chunk order.
void parallelChunks(std::size_t n, const std::function<void(std::size_t, std::size_t, int)>& body);

} // namespace screwiga
