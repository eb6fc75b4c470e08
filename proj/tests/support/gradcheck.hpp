#pragma once

// Central finite-difference gradient checking, used as the independent
// oracle for every backward pass in the project.

#include <cmath>
#include <functional>
#include <vector>

#include "codedcache/linalg.hpp"

namespace codedcache::testing {

inline std::vector<Matrix> copy_tensors(const std::vector<Matrix*>& v) {
  std::vector<Matrix> out;
  out.reserve(v.size());
  for (const Matrix* m : v) out.push_back(*m);
  return out;
}

struct GradCheckStats {
  double max_rel_error = 0.0;
  long entries = 0;
};

// Compares analytic gradients against (f(p+h) - f(p-h)) / 2h entry by
// entry. `loss` must recompute the scalar loss from the current parameter
// values. Relative error uses max(1, |fd|, |analytic|) as the scale.
inline GradCheckStats finite_difference_check(const std::vector<Matrix*>& params,
                                              const std::vector<Matrix>& analytic,
                                              const std::function<double()>& loss,
                                              double h = 1e-5) {
  GradCheckStats stats;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i];
    for (int r = 0; r < p.rows(); ++r) {
      for (int c = 0; c < p.cols(); ++c) {
        double saved = p(r, c);
        p(r, c) = saved + h;
        double up = loss();
        p(r, c) = saved - h;
        double down = loss();
        p(r, c) = saved;
        double fd = (up - down) / (2.0 * h);
        double an = analytic[i](r, c);
        double rel = std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
        stats.max_rel_error = std::max(stats.max_rel_error, rel);
        ++stats.entries;
      }
    }
  }
  return stats;
}

}  // namespace codedcache::testing
