#pragma once

#include <cstddef>
#include <functional>

namespace advlab {

/// Splits [0, n) into at most `threads` contiguous chunks and runs
/// fn(begin, end) on each, one std::thread per chunk beyond the first.
/// The first exception (by chunk order) is rethrown after all chunks join.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace advlab
