#include "epose/util/parallel.hpp"

#include <algorithm>
#include <cstdlib>

namespace epose::util {

int thread_count() {
  static const int cached = [] {
    if (const char* env = std::getenv("EPOSE_THREADS")) {
      const int v = std::atoi(env);
      if (v >= 1) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(std::min(hw, 16u));
  }();
  return cached;
}

void parallel_chunks(std::size_t n, std::size_t num_chunks,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  num_chunks = std::max<std::size_t>(1, std::min(num_chunks, n));
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(thread_count()), num_chunks);

  auto chunk_range = [&](std::size_t c, std::size_t& b, std::size_t& e) {
    const std::size_t base = n / num_chunks, rem = n % num_chunks;
    b = c * base + std::min(c, rem);
    e = b + base + (c < rem ? 1 : 0);
  };

  if (workers <= 1) {
    for (std::size_t c = 0; c < num_chunks; ++c) {
      std::size_t b, e;
      chunk_range(c, b, e);
      fn(c, b, e);
    }
    return;
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t c = next.fetch_add(1);
        if (c >= num_chunks) return;
        std::size_t b, e;
        chunk_range(c, b, e);
        fn(c, b, e);
      }
    });
  }
  for (auto& t : pool) t.join();
}

void parallel_items(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const std::size_t chunks = std::max<std::size_t>(1, static_cast<std::size_t>(thread_count()) * 4);
  parallel_chunks(n, chunks, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) fn(i);
  });
}

}  // namespace epose::util
