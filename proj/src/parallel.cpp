#include "avm/parallel.hpp"

#include <omp.h>

#include <atomic>
#include <cstdlib>

namespace avm {

namespace {
std::atomic<int> g_threads{0};  // 0 = OpenMP default

int env_threads() {
  if (const char* s = std::getenv("AVM_THREADS")) {
    const int v = std::atoi(s);
    if (v > 0) return v;
  }
  return 0;
}
}  // namespace

int thread_count() {
  int n = g_threads.load(std::memory_order_relaxed);
  if (n <= 0) n = env_threads();
  if (n <= 0) n = omp_get_max_threads();
  return n;
}

void set_thread_count(int n) { g_threads.store(n, std::memory_order_relaxed); }

namespace detail {
void parallel_for_impl(std::int64_t n, void (*body)(std::int64_t, void*),
                       void* ctx) {
  const int nt = thread_count();
#pragma omp parallel for schedule(static) num_threads(nt)
  for (std::int64_t i = 0; i < n; ++i) body(i, ctx);
}
}  // namespace detail

}  // namespace avm
