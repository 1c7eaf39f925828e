#pragma once

#include <algorithm>
#include <cstdint>
#include <thread>
#include <vector>

namespace reid {

/// Runs fn(begin, end) over disjoint contiguous index blocks.
///
/// Callers must compute each element independently of the blocking, so the
/// result is identical for every worker count.
template <class Fn>
void parallel_for(std::int64_t n, int workers, Fn&& fn) {
  if (workers <= 1 || n < 2) {
    if (n > 0) fn(std::int64_t{0}, n);
    return;
  }
  const int used = static_cast<int>(std::min<std::int64_t>(workers, n));
  const std::int64_t chunk = (n + used - 1) / used;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(used));
  for (int w = 0; w < used; ++w) {
    const std::int64_t b = w * chunk;
    const std::int64_t e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace reid
