#include "lsm/parallel.hpp"

#include <atomic>

namespace lsm {

namespace {
std::atomic<unsigned> g_threads{1};
}

void set_thread_count(unsigned n) { g_threads = n == 0 ? 1u : n; }

unsigned thread_count() { return g_threads; }

}  // namespace lsm
