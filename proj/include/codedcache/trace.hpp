#pragma once

// Request traces: CSV ingestion/emission, top-F filtering, random per-user
// allocation, and a synthetic periodic-pattern generator for reproducible
// experiments without the original dataset.
//
// CSV schemas (UTF-8, LF):
//   aggregate: slot,file_id,count
//   per-user:  slot,user_id,file_id,count
// Slots are 0-based and contiguous. Zero counts may be omitted; an all-zero
// slot is kept representable by an explicit zero row.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "codedcache/csv.hpp"
#include "codedcache/rng.hpp"

namespace codedcache {

struct DemandTrace {
  int num_slots = 0;
  int num_files = 0;
  int num_users = 0;                      // 0 when aggregate-only
  Eigen::MatrixXd aggregate;              // T x F, integer-valued
  std::vector<Eigen::MatrixXd> per_user;  // T matrices of K x F, empty when aggregate-only

  bool has_per_user() const { return !per_user.empty(); }

  void validate() const {
    if (aggregate.rows() != num_slots || aggregate.cols() != num_files)
      throw std::invalid_argument("aggregate shape mismatch");
    for (int t = 0; t < num_slots; ++t)
      for (int f = 0; f < num_files; ++f) {
        double v = aggregate(t, f);
        if (v < 0.0 || v != std::floor(v))
          throw std::invalid_argument("counts must be non-negative integers");
      }
    if (has_per_user()) {
      if (static_cast<int>(per_user.size()) != num_slots)
        throw std::invalid_argument("per-user slot count mismatch");
      for (int t = 0; t < num_slots; ++t) {
        const auto& m = per_user[static_cast<std::size_t>(t)];
        if (m.rows() != num_users || m.cols() != num_files)
          throw std::invalid_argument("per-user shape mismatch");
        for (int f = 0; f < num_files; ++f) {
          double sum = m.col(f).sum();
          if (std::abs(sum - aggregate(t, f)) > 1e-9)
            throw std::invalid_argument("per-user counts do not sum to aggregate at slot " +
                                        std::to_string(t));
        }
      }
    }
  }
};

namespace detail {

inline void check_contiguous(const std::set<long>& slots, const std::string& path) {
  long expect = 0;
  for (long s : slots) {
    if (s != expect)
      throw std::runtime_error(path + ": slots are not 0-based contiguous (missing slot " +
                               std::to_string(expect) + ")");
    ++expect;
  }
}

}  // namespace detail

// Load an aggregate trace (`slot,file_id,count`). Missing (slot,file) pairs
// are zero. Malformed rows, negative counts and slot gaps are errors that
// name the offending line.
inline DemandTrace load_trace(const std::string& path) {
  CsvFile f = read_csv(path);
  if (f.header != std::vector<std::string>{"slot", "file_id", "count"})
    throw std::runtime_error(path + ": expected header slot,file_id,count");
  std::set<long> slots;
  long max_file = -1;
  struct Row { long t, f, c; };
  std::vector<Row> rows;
  rows.reserve(f.rows.size());
  for (std::size_t i = 0; i < f.rows.size(); ++i) {
    long lineno = f.line_numbers[i];
    if (f.rows[i].size() != 3)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 3 fields");
    long t = parse_count(f.rows[i][0], path, lineno, "slot");
    long fid = parse_count(f.rows[i][1], path, lineno, "file_id");
    long c = parse_count(f.rows[i][2], path, lineno, "count");
    if (t < 0 || fid < 0)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": negative index");
    if (c < 0)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": negative count");
    slots.insert(t);
    max_file = std::max(max_file, fid);
    rows.push_back({t, fid, c});
  }
  detail::check_contiguous(slots, path);
  DemandTrace tr;
  tr.num_slots = static_cast<int>(slots.size());
  tr.num_files = static_cast<int>(max_file + 1);
  tr.aggregate = Eigen::MatrixXd::Zero(tr.num_slots, tr.num_files);
  for (const auto& r : rows) tr.aggregate(r.t, r.f) += static_cast<double>(r.c);
  return tr;
}

// Load a per-user trace (`slot,user_id,file_id,count`); the aggregate is
// reconstructed by summation.
inline DemandTrace load_trace_per_user(const std::string& path) {
  CsvFile f = read_csv(path);
  if (f.header != std::vector<std::string>{"slot", "user_id", "file_id", "count"})
    throw std::runtime_error(path + ": expected header slot,user_id,file_id,count");
  std::set<long> slots;
  long max_file = -1, max_user = -1;
  struct Row { long t, u, f, c; };
  std::vector<Row> rows;
  for (std::size_t i = 0; i < f.rows.size(); ++i) {
    long lineno = f.line_numbers[i];
    if (f.rows[i].size() != 4)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 4 fields");
    long t = parse_count(f.rows[i][0], path, lineno, "slot");
    long u = parse_count(f.rows[i][1], path, lineno, "user_id");
    long fid = parse_count(f.rows[i][2], path, lineno, "file_id");
    long c = parse_count(f.rows[i][3], path, lineno, "count");
    if (t < 0 || u < 0 || fid < 0)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": negative index");
    if (c < 0)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": negative count");
    slots.insert(t);
    max_file = std::max(max_file, fid);
    max_user = std::max(max_user, u);
    rows.push_back({t, u, fid, c});
  }
  detail::check_contiguous(slots, path);
  DemandTrace tr;
  tr.num_slots = static_cast<int>(slots.size());
  tr.num_files = static_cast<int>(max_file + 1);
  tr.num_users = static_cast<int>(max_user + 1);
  tr.aggregate = Eigen::MatrixXd::Zero(tr.num_slots, tr.num_files);
  tr.per_user.assign(static_cast<std::size_t>(tr.num_slots),
                     Eigen::MatrixXd::Zero(tr.num_users, tr.num_files));
  for (const auto& r : rows) {
    tr.per_user[static_cast<std::size_t>(r.t)](r.u, r.f) += static_cast<double>(r.c);
    tr.aggregate(r.t, r.f) += static_cast<double>(r.c);
  }
  return tr;
}

// Writes nonzero counts, plus explicit zero rows where needed so the slot
// range and the catalogue size survive a round trip: every slot emits at
// least one row, and slot 0 always mentions the last file id.
inline void save_trace(const DemandTrace& tr, const std::string& path) {
  CsvWriter w(path, "slot,file_id,count");
  for (int t = 0; t < tr.num_slots; ++t) {
    bool any = false;
    if (t == 0 && tr.num_files > 0 && tr.aggregate(0, tr.num_files - 1) == 0.0) {
      w.row({"0", std::to_string(tr.num_files - 1), "0"});
      any = true;
    }
    for (int f = 0; f < tr.num_files; ++f) {
      long c = static_cast<long>(tr.aggregate(t, f));
      if (c != 0) {
        w.row({std::to_string(t), std::to_string(f), std::to_string(c)});
        any = true;
      }
    }
    if (!any) w.row({std::to_string(t), "0", "0"});
  }
}

inline void save_trace_per_user(const DemandTrace& tr, const std::string& path) {
  if (!tr.has_per_user()) throw std::invalid_argument("trace has no per-user data");
  CsvWriter w(path, "slot,user_id,file_id,count");
  for (int t = 0; t < tr.num_slots; ++t) {
    bool any = false;
    const auto& m = tr.per_user[static_cast<std::size_t>(t)];
    if (t == 0 && tr.num_users > 0 && tr.num_files > 0 &&
        m(tr.num_users - 1, tr.num_files - 1) == 0.0) {
      w.row({"0", std::to_string(tr.num_users - 1), std::to_string(tr.num_files - 1), "0"});
      any = true;
    }
    for (int u = 0; u < tr.num_users; ++u)
      for (int f = 0; f < tr.num_files; ++f) {
        long c = static_cast<long>(m(u, f));
        if (c != 0) {
          w.row({std::to_string(t), std::to_string(u), std::to_string(f), std::to_string(c)});
          any = true;
        }
      }
    if (!any) w.row({std::to_string(t), "0", "0", "0"});
  }
}

// Keep the F files with the largest total demand, ties broken by the smaller
// file id. Kept files are renumbered 0..F-1 in ascending original id; the
// original ids are reported through `kept` when provided.
inline DemandTrace top_f_filter(const DemandTrace& tr, int top, std::vector<int>* kept = nullptr) {
  if (top < 1 || top > tr.num_files)
    throw std::invalid_argument("top-F must be in [1, catalogue size]");
  std::vector<int> order(static_cast<std::size_t>(tr.num_files));
  std::iota(order.begin(), order.end(), 0);
  Eigen::VectorXd totals = tr.aggregate.colwise().sum();
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (totals(a) != totals(b)) return totals(a) > totals(b);
    return a < b;
  });
  std::vector<int> chosen(order.begin(), order.begin() + top);
  std::sort(chosen.begin(), chosen.end());
  if (kept) *kept = chosen;

  DemandTrace out;
  out.num_slots = tr.num_slots;
  out.num_files = top;
  out.num_users = tr.num_users;
  out.aggregate = Eigen::MatrixXd::Zero(tr.num_slots, top);
  for (int j = 0; j < top; ++j) out.aggregate.col(j) = tr.aggregate.col(chosen[static_cast<std::size_t>(j)]);
  if (tr.has_per_user()) {
    out.per_user.reserve(static_cast<std::size_t>(tr.num_slots));
    for (int t = 0; t < tr.num_slots; ++t) {
      Eigen::MatrixXd m(tr.num_users, top);
      for (int j = 0; j < top; ++j)
        m.col(j) = tr.per_user[static_cast<std::size_t>(t)].col(chosen[static_cast<std::size_t>(j)]);
      out.per_user.push_back(std::move(m));
    }
  }
  return out;
}

// Assign every aggregate request independently and uniformly to one of K
// users; the aggregate is conserved exactly.
inline DemandTrace allocate_to_users(const DemandTrace& tr, int users, std::uint64_t seed) {
  if (users <= 0) throw std::invalid_argument("user count must be positive");
  DemandTrace out = tr;
  out.num_users = users;
  out.per_user.assign(static_cast<std::size_t>(tr.num_slots),
                      Eigen::MatrixXd::Zero(users, tr.num_files));
  Rng rng(seed);
  for (int t = 0; t < tr.num_slots; ++t) {
    auto& m = out.per_user[static_cast<std::size_t>(t)];
    for (int f = 0; f < tr.num_files; ++f) {
      long n = static_cast<long>(tr.aggregate(t, f));
      for (long i = 0; i < n; ++i) m(rng.uniform_int(0, users - 1), f) += 1.0;
    }
  }
  return out;
}

struct SynthTraceParams {
  int files = 50;
  int slots = 600;
  int users = 20;
  int patterns = 4;
  int period = 24;
  double noise_level = 0.3;
  double amplitude_min = 4.0;
  double amplitude_max = 30.0;
};

// Files share one of `patterns` periodic request shapes (phase-shifted
// diurnal curves) with file-specific amplitude; noise_level scales both the
// count noise and a slow popularity drift, so noise_level = 0 gives exactly
// periodic series.
inline DemandTrace synth_trace(const SynthTraceParams& p, std::uint64_t seed) {
  if (p.patterns < 1 || p.patterns > p.files)
    throw std::invalid_argument("pattern count must be in [1, files]");
  if (p.slots < 1 || p.period < 1) throw std::invalid_argument("slots and period must be positive");
  Rng rng(derive_seed(seed, "synth-shape"));
  DemandTrace tr;
  tr.num_slots = p.slots;
  tr.num_files = p.files;
  tr.aggregate = Eigen::MatrixXd::Zero(p.slots, p.files);

  std::vector<double> amplitude(static_cast<std::size_t>(p.files));
  std::vector<double> drift_phase(static_cast<std::size_t>(p.files));
  for (int f = 0; f < p.files; ++f) {
    double log_a = rng.uniform(std::log(p.amplitude_min), std::log(p.amplitude_max));
    amplitude[static_cast<std::size_t>(f)] = std::exp(log_a);
    drift_phase[static_cast<std::size_t>(f)] = rng.uniform(0.0, 2.0 * M_PI);
  }

  Rng noise(derive_seed(seed, "synth-noise"));
  const double two_pi = 2.0 * M_PI;
  for (int f = 0; f < p.files; ++f) {
    int pattern = f % p.patterns;
    double pattern_phase = two_pi * pattern / p.patterns;
    for (int t = 0; t < p.slots; ++t) {
      double shape = 1.0 + 0.9 * std::sin(two_pi * t / p.period + pattern_phase);
      double drift = 1.0 + 0.5 * p.noise_level *
                               std::sin(two_pi * t / (8.0 * p.period) +
                                        drift_phase[static_cast<std::size_t>(f)]);
      double rate = amplitude[static_cast<std::size_t>(f)] * shape * drift;
      double count;
      if (p.noise_level == 0.0) {
        count = std::round(rate);
      } else {
        double jitter = p.noise_level * std::sqrt(std::max(rate, 1.0)) * noise.gaussian();
        count = std::round(rate + jitter);
      }
      tr.aggregate(t, f) = std::max(0.0, count);
    }
  }
  return allocate_to_users(tr, p.users, derive_seed(seed, "synth-alloc"));
}

}  // namespace codedcache
