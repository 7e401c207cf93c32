#pragma once

#include <cstddef>
#include <functional>

namespace lori {

/// Worker count: LORI_THREADS env var when set, hardware concurrency otherwise.
int thread_count();

/// Runs f(i) for i in [0, n). Tasks must not share mutable state except
/// through their own index slot; the caller owns deterministic reduction.
/// Rethrows the first task exception after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f);

}  // namespace lori
