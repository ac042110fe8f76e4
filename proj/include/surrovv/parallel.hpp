#pragma once

#include <cstddef>
#include <functional>

namespace surrovv {

/// Worker count: SURROVV_THREADS when set to a positive integer, otherwise
/// std::thread::hardware_concurrency() (at least 1).
unsigned thread_budget();

/// Runs body(i) for i in [0, n) on up to thread_budget() threads. Each index
/// runs exactly once; callers write results into slot i so the reduction
/// order never depends on scheduling. The exception of the lowest failing
/// index is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace surrovv
