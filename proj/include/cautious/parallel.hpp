#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace cautious {

namespace detail {
inline std::atomic<std::size_t>& thread_cap() {
  static std::atomic<std::size_t> cap{0};
  return cap;
}
}  // namespace detail

/// Caps worker threads used by the library; 0 means one per hardware thread.
inline void set_thread_count(std::size_t n) { detail::thread_cap().store(n); }

/// Reads CAUTIOUS_THREADS (0 or unset = auto). Returns false on a malformed value.
inline bool configure_threads_from_env() {
  const char* raw = std::getenv("CAUTIOUS_THREADS");
  if (raw == nullptr || *raw == '\0') return true;
  try {
    std::size_t pos = 0;
    const long v = std::stol(raw, &pos);
    if (pos != std::string(raw).size() || v < 0) return false;
    set_thread_count(static_cast<std::size_t>(v));
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

inline std::size_t effective_threads() {
  std::size_t n = detail::thread_cap().load();
  if (n == 0) n = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  return n;
}

// Runs body(i) for i in [0, count). Each index is visited exactly once and
// bodies must only write to per-index state, so results do not depend on the
// thread count. The first exception thrown by any body is rethrown.
template <typename Body>
void parallel_for(std::size_t count, Body&& body) {
  const std::size_t workers = std::min(effective_threads(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(run);
  run();
  pool.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace cautious
