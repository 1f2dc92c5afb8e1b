#include "kel/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>

#include <Eigen/Core>

namespace kel {

namespace {
int g_threads = 1;
// Eigen's own GEMM threading stays off; all parallelism goes through parallel_for.
[[maybe_unused]] const bool g_eigen_serial = [] {
  Eigen::setNbThreads(1);
  return true;
}();
}  // namespace

void set_threads(int n) {
  g_threads = std::max(1, n);
  Eigen::setNbThreads(1);
}

int threads() { return g_threads; }

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("KEL_THREADS"); env != nullptr) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

}  // namespace kel
