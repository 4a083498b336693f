#include "shlb/parallel.h"

#include <tbb/blocked_range.h>
#include <tbb/global_control.h>
#include <tbb/parallel_for.h>

#include <algorithm>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

namespace shlb {
namespace {

std::mutex g_mutex;
std::size_t g_threads = 0;
std::unique_ptr<tbb::global_control> g_control;

std::size_t threads_from_env() {
  if (const char* env = std::getenv("SHLB_THREADS")) {
    try {
      const long value = std::stol(env);
      if (value > 0) return static_cast<std::size_t>(value);
    } catch (...) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void apply_locked(std::size_t threads) {
  g_threads = threads;
  g_control = std::make_unique<tbb::global_control>(
      tbb::global_control::max_allowed_parallelism, threads);
}

}  // namespace

std::size_t max_threads() {
  std::lock_guard lock(g_mutex);
  if (g_threads == 0) apply_locked(threads_from_env());
  return g_threads;
}

void set_max_threads(std::size_t threads) {
  std::lock_guard lock(g_mutex);
  apply_locked(std::max<std::size_t>(1, threads));
}

void parallel_for(std::size_t n, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& body) {
  if (n == 0) return;
  grain = std::max<std::size_t>(1, grain);
  const std::size_t chunks = (n + grain - 1) / grain;
  if (chunks == 1 || max_threads() == 1) {
    for (std::size_t c = 0; c < chunks; ++c) body(c * grain, std::min(n, (c + 1) * grain));
    return;
  }
  tbb::parallel_for(
      tbb::blocked_range<std::size_t>(0, chunks, 1),
      [&](const tbb::blocked_range<std::size_t>& range) {
        for (std::size_t c = range.begin(); c != range.end(); ++c) {
          body(c * grain, std::min(n, (c + 1) * grain));
        }
      },
      tbb::simple_partitioner());
}

}  // namespace shlb
