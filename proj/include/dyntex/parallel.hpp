#pragma once

#include <functional>

namespace dyntex {

// Worker count for data-parallel loops: hardware concurrency, capped by the
// DYNTEX_THREADS environment variable when it is set to a positive integer.
int thread_budget();

// Runs fn(i) for every i in [0, count). Each index must write only its own
// outputs; under that contract the result is identical to the sequential
// loop for any worker count.
void parallel_index_for(int count, const std::function<void(int)>& fn);

} // namespace dyntex
