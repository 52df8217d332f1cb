#include "cpforge/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace cpforge {

std::size_t worker_count() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CPFORGE_THREADS"); env != nullptr && *env != '\0') {
    try {
      const long cap = std::stol(env);
      if (cap >= 1) n = std::min<std::size_t>(n, static_cast<std::size_t>(cap));
    } catch (const std::exception&) {
      // ignore malformed values
    }
  }
  return n;
}

std::size_t chunk_count(std::size_t n, std::size_t max_chunks) {
  std::size_t w = worker_count();
  if (max_chunks != 0) w = std::min(w, max_chunks);
  return std::max<std::size_t>(1, std::min(w, n));
}

void parallel_chunks(std::size_t n,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body,
                     std::size_t max_chunks) {
  if (n == 0) return;
  const std::size_t chunks = chunk_count(n, max_chunks);
  const std::size_t step = (n + chunks - 1) / chunks;
  if (chunks == 1) {
    body(0, 0, n);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(chunks);
  pool.reserve(chunks);
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t begin = std::min(n, c * step);
    const std::size_t end = std::min(n, begin + step);
    pool.emplace_back([&, c, begin, end] {
      try {
        body(c, begin, end);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace cpforge
