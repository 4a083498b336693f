#pragma once

#include <cstddef>
#include <functional>

namespace shlb {

// Worker-thread cap. Initialized from the SHLB_THREADS environment variable,
// falling back to the hardware concurrency.
std::size_t max_threads();
void set_max_threads(std::size_t threads);

// Runs body(begin, end) over consecutive chunks of [0, n) of `grain` items.
// Chunk boundaries depend only on n and grain, so results that are reduced
// inside a chunk are identical for any thread count.
void parallel_for(std::size_t n, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace shlb
