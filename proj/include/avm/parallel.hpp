#pragma once

#include <cstdint>

namespace avm {

/// Number of OpenMP threads the kernels will use (config / AVM_THREADS).
int thread_count();

/// Set the global thread count; n <= 0 restores the OpenMP default.
void set_thread_count(int n);

namespace detail {
void parallel_for_impl(std::int64_t n, void (*body)(std::int64_t, void*),
                       void* ctx);
}

/// Runs fn(i) for i in [0, n). Iterations must be independent and write
/// disjoint outputs; under that contract the result is identical for any
/// schedule and thread count.
template <class F>
void parallel_for(std::int64_t n, F&& fn) {
  detail::parallel_for_impl(
      n,
      [](std::int64_t i, void* ctx) { (*static_cast<F*>(ctx))(i); },
      &fn);
}

}  // namespace avm
