#pragma once

#include <cstddef>
#include <functional>

namespace d3net {

/// Worker count used by parallel_for; 1 (the default) runs inline.
void set_thread_count(int threads);
int thread_count();

/// Runs body(i) for i in [0, n). Each index must write only its own output slot;
/// callers reduce afterwards in index order so results never depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

} // namespace d3net
