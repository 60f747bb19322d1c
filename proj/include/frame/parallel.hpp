#pragma once

#include <cstddef>
#include <vector>

namespace frame {

/// Selects between the OpenMP kernel and its serial reference. Both produce
/// identical results; the serial path exists for testing and benchmarking.
enum class Execution { serial, parallel };

/// Reads FRAME_THREADS and caps the OpenMP thread count accordingly.
/// Returns the effective maximum thread count.
int configure_threads_from_env();
void set_max_threads(int n);
int max_threads();

/// Reductions are accumulated in fixed-size blocks so that the summation
/// order does not depend on the number of threads.
inline constexpr std::size_t kReductionBlock = 1024;

/// Runs body(i) for i in [0, n). Iterations must be independent.
template <class Body>
void for_each_index(std::size_t n, Execution exec, Body&& body) {
  const auto count = static_cast<std::ptrdiff_t>(n);
  if (exec == Execution::serial) {
    for (std::ptrdiff_t i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
}

/// Sums block_sum(begin, end) over consecutive blocks of kReductionBlock
/// indices. Blocks run in parallel but are combined in index order.
template <class T, class BlockSum, class Combine>
T block_reduce(std::size_t n, Execution exec, T zero, BlockSum&& block_sum, Combine&& combine) {
  const std::size_t blocks = (n + kReductionBlock - 1) / kReductionBlock;
  std::vector<T> partial(blocks, zero);
  for_each_index(blocks, exec, [&](std::size_t b) {
    const std::size_t begin = b * kReductionBlock;
    const std::size_t end = begin + kReductionBlock < n ? begin + kReductionBlock : n;
    partial[b] = block_sum(begin, end);
  });
  T total = zero;
  for (const auto& p : partial) total = combine(total, p);
  return total;
}

}  // namespace frame
