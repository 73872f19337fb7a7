#include "screwiga/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace screwiga {

namespace {
std::atomic<int> g_threads{0};
}

void setThreadCount(int n) { g_threads = std::max(0, n); }

int threadCount() {
  int n = g_threads.load();
  if (n <= 0)
    n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return n;
}

void parallelChunks(std::size_t n, const std::function<void(std::size_t, std::size_t, int)>& body) {
  if (n == 0)
    return;
  const auto workers = static_cast<std::size_t>(std::min<std::size_t>(threadCount(), n));
  if (workers <= 1) {
    body(0, n, 0);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t b = w * chunk;
    const std::size_t e = std::min(n, b + chunk);
    if (b >= e)
      break;
    pool.emplace_back([&, b, e, w] {
      try {
        body(b, e, static_cast<int>(w));
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool)
    t.join();
  for (auto& e : errors)
    if (e)
      std::rethrow_exception(e);
}

} // namespace screwiga
