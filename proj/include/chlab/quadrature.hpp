#pragma once

// Small numerical helpers shared by the modules.

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace chlab {

struct QuadNode {
  double t, w;
};

// Gauss-Legendre rule on [0, 1], nodes ascending; weights sum to 1.
std::vector<QuadNode> gauss_rule(int n);

// Runs fn(i) for i in [0, n) on up to `threads` workers (0: hardware).
// The first exception thrown by any task is rethrown after all workers stop.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace chlab
