#pragma once

#include <cstddef>
#include <functional>

namespace defgrid {

/// Runs fn(i) for every i in [0, count) using at most max_threads workers.
/// Work item i is self-contained and writes only to its own output slot, so
/// the result is independent of the worker count; callers that reduce over
/// item outputs must do so in index order.
void parallel_for(std::size_t count, int max_threads, const std::function<void(std::size_t)>& fn);

/// Number of workers parallel_for would actually use.
int effective_threads(std::size_t count, int max_threads);

}  // namespace defgrid
