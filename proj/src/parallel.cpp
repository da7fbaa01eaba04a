#include "fiolab/parallel.hpp"

#include <atomic>
#include <exception>
#include <mutex>

namespace fiolab {
namespace {
std::atomic<int> g_threads{1};
}

void set_thread_count(int n) { g_threads = std::max(1, n); }
int thread_count() { return g_threads; }

void parallel_tiles(std::size_t n, std::size_t tile,
                    const std::function<void(std::size_t, std::size_t, std::size_t)>& body) {
  tile = std::max<std::size_t>(tile, 1);
  const std::size_t tiles = tile_count(n, tile);
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(thread_count()), tiles);
  auto run = [&](std::size_t t) { body(t * tile, std::min(n, (t + 1) * tile), t); };
  if (workers <= 1) {
    for (std::size_t t = 0; t < tiles; ++t) run(t);
    return;
  }
  // The exception of the lowest failing tile wins, as in the serial loop.
  std::mutex mu;
  std::exception_ptr error;
  std::size_t error_tile = tiles;
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t t = next++; t < tiles; t = next++) {
          try {
            run(t);
          } catch (...) {
            std::lock_guard lock(mu);
            if (t < error_tile) {
              error_tile = t;
              error = std::current_exception();
            }
          }
        }
      });
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace fiolab
