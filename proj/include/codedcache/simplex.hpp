#pragma once

// Dense bounded-variable primal simplex for the small linear programs built
// by the per-slot placement problem.
//
//   minimize c.x   subject to   A x <= b,   lo <= x <= up
//
// Upper bounds may be +infinity; lower bounds must be finite. The solver
// works on a dense tableau, which is fine at this project's problem sizes
// (a few hundred rows and columns). A phase-1 pass with artificial
// variables handles starts that are infeasible at the chosen nonbasic
// bounds; `start_at_upper` lets the caller pick a feasible start directly.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "codedcache/linalg.hpp"

namespace codedcache {

constexpr double kLpInfinity = std::numeric_limits<double>::infinity();

struct LinearProgram {
  std::vector<double> objective;  // c
  std::vector<double> lower, upper;
  struct Row {
    std::vector<int> index;
    std::vector<double> value;
    double rhs = 0.0;
  };
  std::vector<Row> rows;  // a.x <= rhs
  // Variables listed here start at their (finite) upper bound.
  std::vector<int> start_at_upper;

  int add_variable(double cost, double lo, double up) {
    objective.push_back(cost);
    lower.push_back(lo);
    upper.push_back(up);
    return static_cast<int>(objective.size()) - 1;
  }

  void add_row(std::vector<int> idx, std::vector<double> val, double rhs) {
    rows.push_back({std::move(idx), std::move(val), rhs});
  }

  int num_vars() const { return static_cast<int>(objective.size()); }
  int num_rows() const { return static_cast<int>(rows.size()); }
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

struct LpSolution {
  LpStatus status = LpStatus::IterationLimit;
  std::vector<double> x;
  double objective = 0.0;
  long iterations = 0;
};

class SimplexSolver {
 public:
  explicit SimplexSolver(const LinearProgram& lp, long max_iterations = 0)
      : lp_(lp), m_(lp.num_rows()), n_(lp.num_vars()) {
    max_iter_ = max_iterations > 0 ? max_iterations : 2000L + 200L * (m_ + n_);
  }

  LpSolution solve() {
    build();
    LpSolution out;
    if (needs_phase1() && !phase1(out)) return out;
    load_costs(false);
    out.status = iterate(out.iterations);
    extract(out);
    return out;
  }

 private:
  static constexpr double kTol = 1e-9;
  static constexpr double kPivotTol = 1e-9;

  enum Status { AtLower, AtUpper, Basic };

  const LinearProgram& lp_;
  int m_, n_;
  int total_ = 0;
  long max_iter_ = 0;
  Matrix T_;  // m x total, kept canonical w.r.t. the basis
  Vector cost_;
  std::vector<double> lower_, upper_, xval_;
  std::vector<int> basis_;
  std::vector<Status> vstat_;
  std::vector<int> artificials_;

  void build() {
    for (int j = 0; j < n_; ++j) {
      if (!std::isfinite(lp_.lower[static_cast<std::size_t>(j)]))
        throw std::invalid_argument("lower bounds must be finite");
      if (lp_.upper[static_cast<std::size_t>(j)] < lp_.lower[static_cast<std::size_t>(j)])
        throw std::invalid_argument("upper bound below lower bound");
    }
    total_ = n_ + m_;
    T_ = Matrix::Zero(m_, total_);
    lower_.assign(static_cast<std::size_t>(total_), 0.0);
    upper_.assign(static_cast<std::size_t>(total_), kLpInfinity);
    xval_.assign(static_cast<std::size_t>(total_), 0.0);
    vstat_.assign(static_cast<std::size_t>(total_), AtLower);
    for (int j = 0; j < n_; ++j) {
      lower_[static_cast<std::size_t>(j)] = lp_.lower[static_cast<std::size_t>(j)];
      upper_[static_cast<std::size_t>(j)] = lp_.upper[static_cast<std::size_t>(j)];
      xval_[static_cast<std::size_t>(j)] = lower_[static_cast<std::size_t>(j)];
    }
    for (int j : lp_.start_at_upper) {
      if (std::isfinite(upper_[static_cast<std::size_t>(j)])) {
        vstat_[static_cast<std::size_t>(j)] = AtUpper;
        xval_[static_cast<std::size_t>(j)] = upper_[static_cast<std::size_t>(j)];
      }
    }
    basis_.resize(static_cast<std::size_t>(m_));
    for (int i = 0; i < m_; ++i) {
      const auto& row = lp_.rows[static_cast<std::size_t>(i)];
      for (std::size_t k = 0; k < row.index.size(); ++k) T_(i, row.index[k]) += row.value[k];
      T_(i, n_ + i) = 1.0;  // slack
      basis_[static_cast<std::size_t>(i)] = n_ + i;
      vstat_[static_cast<std::size_t>(n_ + i)] = Basic;
      double activity = 0.0;
      for (std::size_t k = 0; k < row.index.size(); ++k)
        activity += row.value[k] * xval_[static_cast<std::size_t>(row.index[k])];
      xval_[static_cast<std::size_t>(n_ + i)] = row.rhs - activity;
    }
  }

  bool needs_phase1() const {
    for (int i = 0; i < m_; ++i)
      if (xval_[static_cast<std::size_t>(n_ + i)] < -kTol) return true;
    return false;
  }

  bool phase1(LpSolution& out) {
    std::vector<int> bad_rows;
    for (int i = 0; i < m_; ++i)
      if (xval_[static_cast<std::size_t>(n_ + i)] < -kTol) bad_rows.push_back(i);
    int extra = static_cast<int>(bad_rows.size());
    T_.conservativeResize(m_, total_ + extra);
    T_.rightCols(extra).setZero();
    lower_.resize(static_cast<std::size_t>(total_ + extra), 0.0);
    upper_.resize(static_cast<std::size_t>(total_ + extra), kLpInfinity);
    xval_.resize(static_cast<std::size_t>(total_ + extra), 0.0);
    vstat_.resize(static_cast<std::size_t>(total_ + extra), AtLower);
    artificials_.clear();
    for (int k = 0; k < extra; ++k) {
      int row = bad_rows[static_cast<std::size_t>(k)];
      int col = total_ + k;
      artificials_.push_back(col);
      int slack = n_ + row;
      double slack_value = xval_[static_cast<std::size_t>(slack)];
      T_(row, col) = -1.0;
      // slack leaves the basis at its lower bound, artificial enters
      vstat_[static_cast<std::size_t>(slack)] = AtLower;
      xval_[static_cast<std::size_t>(slack)] = 0.0;
      basis_[static_cast<std::size_t>(row)] = col;
      vstat_[static_cast<std::size_t>(col)] = Basic;
      xval_[static_cast<std::size_t>(col)] = -slack_value;
      pivot(row, col);  // renormalize the row so the basic column is +1
    }
    total_ += extra;
    load_costs(true);
    long iters = 0;
    LpStatus st = iterate(iters);
    out.iterations += iters;
    double infeasibility = 0.0;
    for (int col : artificials_) infeasibility += xval_[static_cast<std::size_t>(col)];
    if (st == LpStatus::IterationLimit || infeasibility > 1e-7) {
      out.status = st == LpStatus::IterationLimit ? st : LpStatus::Infeasible;
      return false;
    }
    // pin artificials at zero for phase 2
    for (int col : artificials_) upper_[static_cast<std::size_t>(col)] = 0.0;
    return true;
  }

  void load_costs(bool phase1_costs) {
    cost_ = Vector::Zero(total_);
    if (phase1_costs) {
      for (int col : artificials_) cost_(col) = 1.0;
    } else {
      for (int j = 0; j < n_; ++j) cost_(j) = lp_.objective[static_cast<std::size_t>(j)];
    }
  }

  LpStatus iterate(long& iterations) {
    const long bland_after = 500L + 4L * (m_ + total_);
    Vector cb(m_);
    for (long iter = 0; iter < max_iter_; ++iter) {
      ++iterations;
      const bool bland = iter > bland_after;
      for (int i = 0; i < m_; ++i) cb(i) = cost_(basis_[static_cast<std::size_t>(i)]);
      Vector reduced = cost_ - T_.transpose() * cb;

      int enter = -1, direction = +1;
      double best_score = kTol;
      for (int j = 0; j < total_; ++j) {
        Status s = vstat_[static_cast<std::size_t>(j)];
        if (s == Basic) continue;
        if (lower_[static_cast<std::size_t>(j)] == upper_[static_cast<std::size_t>(j)]) continue;
        double d = reduced(j);
        double score;
        int dir;
        if (s == AtLower && d < -kTol) {
          score = -d;
          dir = +1;
        } else if (s == AtUpper && d > kTol) {
          score = d;
          dir = -1;
        } else {
          continue;
        }
        if (bland) {
          enter = j;
          direction = dir;
          break;
        }
        if (score > best_score) {
          best_score = score;
          enter = j;
          direction = dir;
        }
      }
      if (enter == -1) return LpStatus::Optimal;

      // ratio test: entering moves by `step`, basics by -direction*step*T(:,enter)
      double flip_room = upper_[static_cast<std::size_t>(enter)] -
                         lower_[static_cast<std::size_t>(enter)];
      int leave_row = -1;
      bool leave_to_upper = false;
      double best_room = kLpInfinity;
      for (int i = 0; i < m_; ++i) {
        double coeff = direction * T_(i, enter);
        if (std::abs(coeff) < kPivotTol) continue;
        int bi = basis_[static_cast<std::size_t>(i)];
        double value = xval_[static_cast<std::size_t>(bi)];
        double room;
        bool to_upper;
        if (coeff > 0) {  // basic decreases toward its lower bound
          room = (value - lower_[static_cast<std::size_t>(bi)]) / coeff;
          to_upper = false;
        } else {  // basic increases toward its upper bound
          double ub = upper_[static_cast<std::size_t>(bi)];
          if (!std::isfinite(ub)) continue;
          room = (value - ub) / coeff;
          to_upper = true;
        }
        room = std::max(room, 0.0);
        bool better = room < best_room - 1e-12;
        bool tie = std::abs(room - best_room) <= 1e-12 && leave_row >= 0 &&
                   bi < basis_[static_cast<std::size_t>(leave_row)];
        if (better || tie) {
          best_room = room;
          leave_row = i;
          leave_to_upper = to_upper;
        }
      }

      if (leave_row == -1 || flip_room < best_room - 1e-12) {
        // no basic blocks first: bound flip (or unbounded)
        if (!std::isfinite(flip_room)) return LpStatus::Unbounded;
        move_entering(enter, direction, flip_room);
        vstat_[static_cast<std::size_t>(enter)] = direction > 0 ? AtUpper : AtLower;
        continue;
      }

      move_entering(enter, direction, best_room);
      int leaving = basis_[static_cast<std::size_t>(leave_row)];
      xval_[static_cast<std::size_t>(leaving)] =
          leave_to_upper ? upper_[static_cast<std::size_t>(leaving)]
                         : lower_[static_cast<std::size_t>(leaving)];
      vstat_[static_cast<std::size_t>(leaving)] = leave_to_upper ? AtUpper : AtLower;
      pivot(leave_row, enter);
      basis_[static_cast<std::size_t>(leave_row)] = enter;
      vstat_[static_cast<std::size_t>(enter)] = Basic;
    }
    return LpStatus::IterationLimit;
  }

  void move_entering(int enter, int direction, double step) {
    if (step <= 0.0) return;
    for (int i = 0; i < m_; ++i) {
      int bi = basis_[static_cast<std::size_t>(i)];
      xval_[static_cast<std::size_t>(bi)] -= direction * step * T_(i, enter);
    }
    xval_[static_cast<std::size_t>(enter)] += direction * step;
  }

  void pivot(int row, int col) {
    T_.row(row) /= T_(row, col);
    for (int i = 0; i < m_; ++i) {
      if (i == row) continue;
      double factor = T_(i, col);
      if (factor != 0.0) T_.row(i) -= factor * T_.row(row);
    }
  }

  void extract(LpSolution& out) const {
    out.x.assign(static_cast<std::size_t>(n_), 0.0);
    double obj = 0.0;
    for (int j = 0; j < n_; ++j) {
      double v = xval_[static_cast<std::size_t>(j)];
      out.x[static_cast<std::size_t>(j)] = v;
      obj += lp_.objective[static_cast<std::size_t>(j)] * v;
    }
    out.objective = obj;
  }
};

inline LpSolution solve_lp(const LinearProgram& lp, long max_iterations = 0) {
  SimplexSolver solver(lp, max_iterations);
  return solver.solve();
}

}  // namespace codedcache
