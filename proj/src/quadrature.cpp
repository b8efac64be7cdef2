#include "chlab/quadrature.hpp"

#include <atomic>
#include <boost/math/special_functions/legendre.hpp>

namespace chlab {

std::vector<QuadNode> gauss_rule(int n) {
  std::vector<QuadNode> r;
  for (double z : boost::math::legendre_p_zeros<double>(n)) {
    double dp = boost::math::legendre_p_prime<double>(n, z);
    double w = 1.0 / ((1.0 - z * z) * dp * dp);
    if (z == 0.0) {
      r.push_back({0.5, w});
    } else {
      r.push_back({0.5 * (1.0 - z), w});
      r.push_back({0.5 * (1.0 + z), w});
    }
  }
  std::sort(r.begin(), r.end(), [](const QuadNode& a, const QuadNode& b) { return a.t < b.t; });
  return r;
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  std::size_t workers = threads > 0 ? threads : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex m;
  auto work = [&] {
    for (;;) {
      std::size_t i = next++;
      if (i >= n) return;
      {
        std::lock_guard lock(m);
        if (error) return;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(m);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t k = 0; k < workers; ++k) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace chlab
