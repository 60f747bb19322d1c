#include "frame/parallel.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace frame {

void set_max_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

int configure_threads_from_env() {
  if (const char* env = std::getenv("FRAME_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0 && n < max_threads()) set_max_threads(n);
    } catch (const std::exception&) {
      // unparseable values leave the OpenMP default in place
    }
  }
  return max_threads();
}

}  // namespace frame
