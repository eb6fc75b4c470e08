#pragma once

// Independent reference implementations used only by tests. These must stay
// free of the library code paths they check.

#include <algorithm>
#include <cmath>
#include <vector>

#include "codedcache/net_model.hpp"

namespace codedcache::testing {

// Sequential greedy download: walk the user's reachable nodes in ascending
// delay order, take min(cached fraction, remaining) from each, and fetch the
// shortfall from the MBS.
inline double greedy_download_delay(const Topology& topo, const CacheMatrix& cache, int user,
                                    int file) {
  double remaining = 1.0;
  double total = 0.0;
  for (int node : topo.reachable[static_cast<std::size_t>(user)]) {
    double frac = node == 0 ? remaining
                            : std::min(cache.fractions(node - 1, file), remaining);
    total += frac * cache.file_size_bits * topo.per_bit_delay(user, node);
    remaining -= frac;
    if (node == 0 || remaining <= 0.0) break;
  }
  return total;
}

inline double relative_error(double a, double b) {
  double scale = std::max({1.0, std::abs(a), std::abs(b)});
  return std::abs(a - b) / scale;
}

}  // namespace codedcache::testing
