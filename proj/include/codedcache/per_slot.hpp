#pragma once

// Per-slot placement: minimize the predicted transmission delay plus the
// weighted replacement cost for one slot, over cache fractions in [0,1] with
// per-node capacity budgets. The coded-delivery max-form delay is linearized
// with one epigraph variable per (user, file), so the whole problem is an LP.
// Used both as the myopic baseline policy and as the label generator for
// actor pre-training. An exhaustive grid oracle is provided for verification
// on tiny instances.

#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "codedcache/csv.hpp"
#include "codedcache/linalg.hpp"
#include "codedcache/net_model.hpp"
#include "codedcache/simplex.hpp"

namespace codedcache {

struct PerSlotProblem {
  const Topology* topology = nullptr;
  Matrix prev_fractions;    // N x F
  Vector predicted_demand;  // F, >= 0
  Matrix weights;           // K x F, each column sums to 1
  double beta = 0.0;
  double capacity = 0.0;      // M
  double file_size_bits = 0;  // B
};

// Allocation weights from the previous slot's per-user counts; files nobody
// requested fall back to a uniform split.
inline Matrix allocation_weights(const Matrix& prev_user_demand, int users, int files) {
  Matrix w(users, files);
  if (prev_user_demand.size() == 0) {
    w.setConstant(1.0 / users);
    return w;
  }
  if (prev_user_demand.rows() != users || prev_user_demand.cols() != files)
    throw std::invalid_argument("previous demand shape mismatch");
  for (int f = 0; f < files; ++f) {
    double total = prev_user_demand.col(f).sum();
    if (total > 0.0)
      w.col(f) = prev_user_demand.col(f) / total;
    else
      w.col(f).setConstant(1.0 / users);
  }
  return w;
}

inline PerSlotProblem make_per_slot_problem(const Topology& topo, const CacheMatrix& prev,
                                            const Vector& predicted_demand,
                                            const Matrix& prev_user_demand, double beta) {
  PerSlotProblem p;
  p.topology = &topo;
  p.prev_fractions = prev.fractions;
  p.predicted_demand = predicted_demand.cwiseMax(0.0);
  p.weights = allocation_weights(prev_user_demand, topo.num_users(), prev.num_files());
  p.beta = beta;
  p.capacity = prev.capacity;
  p.file_size_bits = prev.file_size_bits;
  return p;
}

// Predicted transmission delay of a candidate placement under the problem's
// user allocation weights.
inline double predicted_delay_cost(const PerSlotProblem& p, const CacheMatrix& candidate) {
  const Topology& topo = *p.topology;
  double total = 0.0;
  for (int k = 0; k < topo.num_users(); ++k)
    for (int f = 0; f < candidate.num_files(); ++f) {
      double d = p.weights(k, f) * p.predicted_demand(f);
      if (d > 0.0) total += d * file_delay(topo, candidate, k, f);
    }
  return total;
}

inline double per_slot_objective(const PerSlotProblem& p, const CacheMatrix& candidate) {
  return predicted_delay_cost(p, candidate) +
         p.beta * replacement_cost(p.prev_fractions, candidate.fractions);
}

struct PerSlotLp {
  LinearProgram lp;
  int nodes = 0, files = 0, users = 0;
  int lambda_offset = 0, u_offset = 0, v_offset = 0;

  int lambda_index(int node, int file) const { return lambda_offset + node * files + file; }
  int u_index(int user, int file) const { return u_offset + user * files + file; }
  int v_index(int node, int file) const { return v_offset + node * files + file; }
};

// Variables: cache fractions, per-(user,file) delay epigraph variables, and
// per-(node,file) replacement increments. Epigraph variables start at their
// upper bound (the MBS-only delay), which keeps the all-slack basis feasible.
inline PerSlotLp build_epigraph_lp(const PerSlotProblem& p) {
  const Topology& topo = *p.topology;
  const int N = static_cast<int>(p.prev_fractions.rows());
  const int F = static_cast<int>(p.prev_fractions.cols());
  const int K = topo.num_users();
  const double B = p.file_size_bits;

  PerSlotLp out;
  out.nodes = N;
  out.files = F;
  out.users = K;
  LinearProgram& lp = out.lp;

  out.lambda_offset = 0;
  for (int n = 0; n < N; ++n)
    for (int f = 0; f < F; ++f) lp.add_variable(0.0, 0.0, 1.0);
  out.u_offset = lp.num_vars();
  for (int k = 0; k < K; ++k)
    for (int f = 0; f < F; ++f) {
      double coeff = p.weights(k, f) * p.predicted_demand(f);
      int idx = lp.add_variable(coeff, 0.0, B * topo.per_bit_delay(k, 0));
      lp.start_at_upper.push_back(idx);
    }
  out.v_offset = lp.num_vars();
  for (int n = 0; n < N; ++n)
    for (int f = 0; f < F; ++f) lp.add_variable(p.beta, 0.0, 1.0);

  // delay epigraph: for each truncation depth j along the user's node order
  for (int k = 0; k < K; ++k) {
    const auto& order = topo.reachable[static_cast<std::size_t>(k)];
    for (int f = 0; f < F; ++f) {
      for (std::size_t j = 0; j < order.size(); ++j) {
        double dj = topo.per_bit_delay(k, order[j]);
        std::vector<int> idx;
        std::vector<double> val;
        for (std::size_t i = 0; i < j; ++i) {
          int node = order[i];
          idx.push_back(out.lambda_index(node - 1, f));
          val.push_back(B * (topo.per_bit_delay(k, node) - dj));
        }
        idx.push_back(out.u_index(k, f));
        val.push_back(-1.0);
        lp.add_row(std::move(idx), std::move(val), -B * dj);
      }
    }
  }
  // replacement: lambda - v <= prev
  for (int n = 0; n < N; ++n)
    for (int f = 0; f < F; ++f)
      lp.add_row({out.lambda_index(n, f), out.v_index(n, f)}, {1.0, -1.0},
                 p.prev_fractions(n, f));
  // capacity per node
  for (int n = 0; n < N; ++n) {
    std::vector<int> idx;
    std::vector<double> val(static_cast<std::size_t>(F), 1.0);
    for (int f = 0; f < F; ++f) idx.push_back(out.lambda_index(n, f));
    lp.add_row(std::move(idx), std::move(val), p.capacity);
  }
  return out;
}

enum class SolveStatus { Optimal, FellBack };

struct PlacementSolution {
  CacheMatrix cache;
  double objective = 0.0;
  SolveStatus status = SolveStatus::Optimal;
  long iterations = 0;
};

namespace detail {

inline CacheMatrix extract_placement(const PerSlotProblem& p, const PerSlotLp& lp,
                                     const std::vector<double>& x) {
  const int N = lp.nodes, F = lp.files;
  CacheMatrix cache = make_cache(N, F, p.capacity, p.file_size_bits);
  for (int n = 0; n < N; ++n) {
    for (int f = 0; f < F; ++f)
      cache.fractions(n, f) =
          std::clamp(x[static_cast<std::size_t>(lp.lambda_index(n, f))], 0.0, 1.0);
    double row = cache.fractions.row(n).sum();
    if (row > p.capacity && row > 0.0) cache.fractions.row(n) *= p.capacity / row;
  }
  return cache;
}

}  // namespace detail

// Falls back to the previous placement if the solver fails to converge.
inline PlacementSolution solve_per_slot(const PerSlotProblem& p, long max_iterations = 0) {
  PerSlotLp lp = build_epigraph_lp(p);
  LpSolution sol = solve_lp(lp.lp, max_iterations);
  PlacementSolution out;
  out.iterations = sol.iterations;
  if (sol.status != LpStatus::Optimal) {
    out.status = SolveStatus::FellBack;
    out.cache = make_cache(lp.nodes, lp.files, p.capacity, p.file_size_bits);
    out.cache.fractions = p.prev_fractions;
    out.objective = per_slot_objective(p, out.cache);
    return out;
  }
  out.status = SolveStatus::Optimal;
  out.cache = detail::extract_placement(p, lp, sol.x);
  out.objective = per_slot_objective(p, out.cache);
  return out;
}

// Exhaustive grid search over placements with fractions restricted to
// multiples of grid_step, respecting capacity. Only for tiny instances.
inline PlacementSolution brute_force_oracle(const PerSlotProblem& p, double grid_step) {
  const Topology& topo = *p.topology;
  const int N = static_cast<int>(p.prev_fractions.rows());
  const int F = static_cast<int>(p.prev_fractions.cols());
  if (N * F > 6) throw std::invalid_argument("instance too large for the grid oracle");
  double inv = 1.0 / grid_step;
  if (std::abs(inv - std::round(inv)) > 1e-9)
    throw std::invalid_argument("grid step must divide 1");
  const int levels = static_cast<int>(std::round(inv)) + 1;

  // all per-node columns for one file, with their delay + replacement cost
  struct Column {
    Vector values;
    double cost;
  };
  auto column_delay = [&](int f, const Vector& col) {
    double total = 0.0;
    for (int k = 0; k < topo.num_users(); ++k) {
      double demand = p.weights(k, f) * p.predicted_demand(f);
      if (demand <= 0.0) continue;
      // greedy walk over the user's node order
      const auto& order = topo.reachable[static_cast<std::size_t>(k)];
      double best = 0.0, taken = 0.0, partial = 0.0;
      for (std::size_t j = 0; j < order.size(); ++j) {
        int node = order[j];
        double dj = topo.per_bit_delay(k, node);
        best = std::max(best, p.file_size_bits * (partial + (1.0 - taken) * dj));
        if (node != 0) {
          partial += col(node - 1) * dj;
          taken += col(node - 1);
        }
      }
      total += demand * best;
    }
    return total;
  };

  std::vector<std::vector<Column>> per_file(static_cast<std::size_t>(F));
  for (int f = 0; f < F; ++f) {
    std::vector<Column>& cols = per_file[static_cast<std::size_t>(f)];
    Vector col = Vector::Zero(N);
    std::vector<int> digits(static_cast<std::size_t>(N), 0);
    while (true) {
      for (int n = 0; n < N; ++n) col(n) = digits[static_cast<std::size_t>(n)] * grid_step;
      double repl = 0.0;
      for (int n = 0; n < N; ++n) repl += std::max(col(n) - p.prev_fractions(n, f), 0.0);
      cols.push_back({col, column_delay(f, col) + p.beta * repl});
      int d = 0;
      while (d < N && ++digits[static_cast<std::size_t>(d)] == levels) {
        digits[static_cast<std::size_t>(d)] = 0;
        ++d;
      }
      if (d == N) break;
    }
  }

  Matrix best_placement = Matrix::Zero(N, F);
  double best_cost = kLpInfinity;
  Matrix current = Matrix::Zero(N, F);
  Vector node_load = Vector::Zero(N);
  auto recurse = [&](auto&& self, int f, double cost) -> void {
    if (cost >= best_cost) return;
    if (f == F) {
      best_cost = cost;
      best_placement = current;
      return;
    }
    for (const Column& col : per_file[static_cast<std::size_t>(f)]) {
      bool fits = true;
      for (int n = 0; n < N && fits; ++n)
        if (node_load(n) + col.values(n) > p.capacity + 1e-9) fits = false;
      if (!fits) continue;
      node_load += col.values;
      current.col(f) = col.values;
      self(self, f + 1, cost + col.cost);
      node_load -= col.values;
    }
  };
  recurse(recurse, 0, 0.0);

  PlacementSolution out;
  out.status = SolveStatus::Optimal;
  out.cache = make_cache(N, F, p.capacity, p.file_size_bits);
  out.cache.fractions = best_cost == kLpInfinity ? Matrix::Zero(N, F) : best_placement;
  out.objective = per_slot_objective(p, out.cache);
  return out;
}

// Objective resolution of one grid step: an upper bound on how much the
// objective can move when every fraction shifts by at most grid_step.
inline double grid_objective_resolution(const PerSlotProblem& p, double grid_step) {
  const Topology& topo = *p.topology;
  const int N = static_cast<int>(p.prev_fractions.rows());
  const int F = static_cast<int>(p.prev_fractions.cols());
  double res = 0.0;
  for (int f = 0; f < F; ++f) {
    double delay_sensitivity = 0.0;
    for (int k = 0; k < topo.num_users(); ++k)
      delay_sensitivity +=
          p.weights(k, f) * p.predicted_demand(f) * p.file_size_bits * topo.per_bit_delay(k, 0);
    res += N * grid_step * (p.beta + delay_sensitivity);
  }
  return res;
}

// Text dump in CPLEX LP format, for cross-checking with external solvers.
inline void write_lp_format(const PerSlotLp& built, std::ostream& os) {
  const LinearProgram& lp = built.lp;
  auto name = [&](int idx) -> std::string {
    if (idx >= built.v_offset) {
      int r = idx - built.v_offset;
      return "v_n" + std::to_string(r / built.files) + "_f" + std::to_string(r % built.files);
    }
    if (idx >= built.u_offset) {
      int r = idx - built.u_offset;
      return "u_k" + std::to_string(r / built.files) + "_f" + std::to_string(r % built.files);
    }
    return "lam_n" + std::to_string(idx / built.files) + "_f" +
           std::to_string(idx % built.files);
  };
  os << "\\ per-slot coded cache placement\n";
  os << "Minimize\n obj:";
  bool first = true;
  for (int j = 0; j < lp.num_vars(); ++j) {
    double c = lp.objective[static_cast<std::size_t>(j)];
    if (c == 0.0) continue;
    os << (first ? " " : " + ") << format_double(c) << " " << name(j);
    first = false;
  }
  if (first) os << " 0 " << name(0);
  os << "\nSubject To\n";
  for (int i = 0; i < lp.num_rows(); ++i) {
    const auto& row = lp.rows[static_cast<std::size_t>(i)];
    os << " c" << i << ":";
    for (std::size_t kk = 0; kk < row.index.size(); ++kk) {
      double v = row.value[kk];
      os << (v >= 0.0 ? " + " : " - ") << format_double(std::abs(v)) << " "
         << name(row.index[kk]);
    }
    os << " <= " << format_double(row.rhs) << "\n";
  }
  os << "Bounds\n";
  for (int j = 0; j < lp.num_vars(); ++j) {
    os << " " << format_double(lp.lower[static_cast<std::size_t>(j)]) << " <= " << name(j);
    if (std::isfinite(lp.upper[static_cast<std::size_t>(j)]))
      os << " <= " << format_double(lp.upper[static_cast<std::size_t>(j)]);
    os << "\n";
  }
  os << "End\n";
}

}  // namespace codedcache
