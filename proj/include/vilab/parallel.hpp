#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace vilab {

/// Worker cap for element loops (0 = hardware concurrency).
void set_num_threads(int n);
int num_threads();

/// Calls fn(begin, end) on contiguous chunks of [0, n). Chunk boundaries
/// depend only on n and the thread count; callers write to disjoint slots and
/// reduce in index order, so results do not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace vilab
