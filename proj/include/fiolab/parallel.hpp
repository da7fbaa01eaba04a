#pragma once

// Deterministic parallel loops. Work is cut into fixed-size tiles that do
// not depend on the thread count, and tile results are combined in tile
// order, so results are bit-identical for any number of threads.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace fiolab {

void set_thread_count(int n);
int thread_count();

/// Calls body(begin, end, tile_index) for every tile of [0, n).
void parallel_tiles(std::size_t n, std::size_t tile,
                    const std::function<void(std::size_t, std::size_t, std::size_t)>& body);

inline std::size_t tile_count(std::size_t n, std::size_t tile) { return (n + tile - 1) / tile; }

/// Pairwise (tree) sum, fixed order.
template <class T>
T pairwise_sum(const std::vector<T>& v, std::size_t lo = 0, std::size_t hi = static_cast<std::size_t>(-1)) {
  if (hi == static_cast<std::size_t>(-1)) hi = v.size();
  if (hi <= lo) return T{};
  if (hi - lo <= 8) {
    T s{};
    for (std::size_t k = lo; k < hi; ++k) s += v[k];
    return s;
  }
  std::size_t mid = lo + (hi - lo) / 2;
  return pairwise_sum(v, lo, mid) + pairwise_sum(v, mid, hi);
}

}  // namespace fiolab
