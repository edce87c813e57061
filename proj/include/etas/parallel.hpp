#pragma once

#include <cstddef>
#include <functional>

namespace etas {

// Upper bound on worker threads used by data-parallel loops. 0 means
// hardware concurrency.
void set_thread_count(unsigned n);
[[nodiscard]] unsigned thread_count();

// Runs body(i) for i in [0, n). Each index is visited exactly once; callers
// write per-index results and reduce them sequentially so output does not
// depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace etas
