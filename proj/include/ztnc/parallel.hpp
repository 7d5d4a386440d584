#pragma once

#include <cstddef>
#include <functional>

namespace ztnc {

// 0 means std::thread::hardware_concurrency().
unsigned resolve_threads(unsigned requested) noexcept;

// Runs fn(0) .. fn(n-1) on up to `threads` workers. Results must be written
// by index, which keeps output independent of scheduling. If any call throws,
// the exception from the lowest failing index is rethrown after all workers
// stop.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace ztnc
