#pragma once

// Deterministic model of a multi-cell wireless caching network: node/user
// geometry, pathloss-limited per-bit delays, coded-delivery file delay, and
// the per-slot transmission / replacement / total cost terms.
//
// Conventions: node index 0 is the macro base station (MBS), cache nodes are
// 1..N. Delays are seconds per bit; file delay and transmission cost are in
// seconds; replacement cost is in dimensionless fraction units, so the
// weight beta carries seconds per unit fraction.

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "codedcache/linalg.hpp"
#include "codedcache/rng.hpp"

namespace codedcache {

struct CostParams {
  double beta = 1.5;    // replacement weight, seconds per unit fraction
  double gamma = 0.99;  // discount factor

  void validate() const {
    if (beta < 0.0) throw std::invalid_argument("beta must be >= 0");
    if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("gamma must be in [0,1]");
  }
};

// Coded cache placement: fractions(n,f) is the fraction of file f's coded
// bits stored at cache node n (node index here is 1-based node minus one).
struct CacheMatrix {
  static constexpr double kCapacityTol = 1e-9;

  Matrix fractions;            // N x F
  double capacity = 0.0;       // M, row budget in file units
  double file_size_bits = 0.0; // B

  int num_nodes() const { return static_cast<int>(fractions.rows()); }
  int num_files() const { return static_cast<int>(fractions.cols()); }

  bool valid(std::string* why = nullptr) const {
    for (int n = 0; n < fractions.rows(); ++n) {
      double row_sum = 0.0;
      for (int f = 0; f < fractions.cols(); ++f) {
        double v = fractions(n, f);
        if (!std::isfinite(v) || v < -kCapacityTol || v > 1.0 + kCapacityTol) {
          if (why) *why = "fraction out of [0,1] at node " + std::to_string(n) +
                          " file " + std::to_string(f);
          return false;
        }
        row_sum += v;
      }
      if (row_sum > capacity + kCapacityTol) {
        if (why) *why = "capacity exceeded at node " + std::to_string(n) +
                        " (sum " + std::to_string(row_sum) + ")";
        return false;
      }
    }
    return true;
  }

  void validate() const {
    std::string why;
    if (!valid(&why)) throw std::invalid_argument("invalid cache matrix: " + why);
  }
};

inline CacheMatrix make_cache(int nodes, int files, double capacity, double file_size_bits) {
  CacheMatrix c;
  c.fractions = Matrix::Zero(nodes, files);
  c.capacity = capacity;
  c.file_size_bits = file_size_bits;
  return c;
}

// Uniform full placement: every node caches capacity/F of every file.
inline CacheMatrix make_uniform_cache(int nodes, int files, double capacity,
                                      double file_size_bits) {
  CacheMatrix c = make_cache(nodes, files, capacity, file_size_bits);
  double v = std::min(1.0, capacity / static_cast<double>(files));
  c.fractions.setConstant(v);
  return c;
}

struct LinkBudget {
  double tx_power_w = 1.0;
  double bandwidth_hz = 1e5;
  double noise_psd_dbm_hz = -152.0;
  double antenna_gain_dbi = 1.0;
};

// Seconds per bit over a pathloss-limited Shannon-rate link,
// PL(dB) = 148.1 + 37.6 log10(d_km).
inline double per_bit_delay_seconds(double distance_km, const LinkBudget& lb) {
  if (distance_km <= 0.0) throw std::invalid_argument("distance must be positive");
  if (lb.tx_power_w <= 0.0) throw std::invalid_argument("tx power must be positive");
  if (lb.bandwidth_hz <= 0.0) throw std::invalid_argument("bandwidth must be positive");
  double pathloss_db = 148.1 + 37.6 * std::log10(distance_km);
  double tx_dbm = 10.0 * std::log10(lb.tx_power_w * 1000.0);
  double rx_dbm = tx_dbm + lb.antenna_gain_dbi - pathloss_db;
  double noise_dbm = lb.noise_psd_dbm_hz + 10.0 * std::log10(lb.bandwidth_hz);
  double snr = std::pow(10.0, (rx_dbm - noise_dbm) / 10.0);
  double rate_bps = lb.bandwidth_hz * std::log2(1.0 + snr);
  return 1.0 / rate_bps;
}

struct Topology {
  Matrix cache_positions;  // N x 2, meters
  Matrix user_positions;   // K x 2, meters
  double coverage_radius = 0.0;
  Matrix per_bit_delay;    // K x (N+1); column 0 is the MBS
  // Per user: reachable node ids sorted ascending by per-bit delay, with the
  // MBS (id 0) always last.
  std::vector<std::vector<int>> reachable;

  int num_nodes() const { return static_cast<int>(cache_positions.rows()); }
  int num_users() const { return static_cast<int>(user_positions.rows()); }

  double delay(int user, int node) const { return per_bit_delay(user, node); }

  nlohmann::json to_json() const;
  static Topology from_json(const nlohmann::json& j);
};

namespace detail {

inline std::vector<int> sorted_reachable(const Matrix& delays, int user, int n_nodes,
                                         const std::vector<bool>& in_range) {
  std::vector<int> nodes;
  for (int n = 1; n <= n_nodes; ++n)
    if (in_range[static_cast<std::size_t>(n - 1)]) nodes.push_back(n);
  std::sort(nodes.begin(), nodes.end(), [&](int a, int b) {
    if (delays(user, a) != delays(user, b)) return delays(user, a) < delays(user, b);
    return a < b;
  });
  nodes.push_back(0);  // MBS, strictly slowest by construction
  return nodes;
}

}  // namespace detail

// Assemble a topology from explicit positions. The MBS per-bit delay is set
// to mbs_delay_factor times the maximum cache-node delay over all
// (user, node) pairs, so it is strictly the slowest link for every user.
inline Topology make_topology(const Matrix& cache_positions, const Matrix& user_positions,
                              double coverage_radius, const LinkBudget& lb,
                              double mbs_delay_factor = 3.0) {
  if (cache_positions.rows() < 1) throw std::invalid_argument("need at least one cache node");
  if (coverage_radius <= 0.0) throw std::invalid_argument("coverage radius must be positive");
  Topology t;
  t.cache_positions = cache_positions;
  t.user_positions = user_positions;
  t.coverage_radius = coverage_radius;
  int n_nodes = t.num_nodes();
  int n_users = t.num_users();
  t.per_bit_delay = Matrix::Zero(n_users, n_nodes + 1);
  double max_delay = 0.0;
  for (int k = 0; k < n_users; ++k) {
    for (int n = 0; n < n_nodes; ++n) {
      double d_m = (user_positions.row(k) - cache_positions.row(n)).norm();
      double delay = per_bit_delay_seconds(d_m / 1000.0, lb);
      t.per_bit_delay(k, n + 1) = delay;
      max_delay = std::max(max_delay, delay);
    }
  }
  double mbs_delay = mbs_delay_factor * max_delay;
  t.reachable.resize(static_cast<std::size_t>(n_users));
  for (int k = 0; k < n_users; ++k) {
    t.per_bit_delay(k, 0) = mbs_delay;
    std::vector<bool> in_range(static_cast<std::size_t>(n_nodes));
    for (int n = 0; n < n_nodes; ++n) {
      double d_m = (user_positions.row(k) - cache_positions.row(n)).norm();
      in_range[static_cast<std::size_t>(n)] = d_m <= coverage_radius;
    }
    t.reachable[static_cast<std::size_t>(k)] =
        detail::sorted_reachable(t.per_bit_delay, k, n_nodes, in_range);
  }
  return t;
}

// Positions of a hexagonal lattice spiral: the center first, then rings of
// 6r nodes at ring r. Taking a prefix supports node counts that are not of
// the form 1 + 6r(r+1)/2.
inline Matrix hex_spiral_positions(int n_nodes, double spacing) {
  std::vector<std::pair<double, double>> pts;
  pts.emplace_back(0.0, 0.0);
  int ring = 1;
  while (static_cast<int>(pts.size()) < n_nodes) {
    // axial directions of a pointy-top hex lattice
    static const int dq[6] = {1, 0, -1, -1, 0, 1};
    static const int dr[6] = {0, 1, 1, 0, -1, -1};
    int q = ring, r = -ring;  // start corner
    for (int side = 0; side < 6 && static_cast<int>(pts.size()) < n_nodes; ++side) {
      for (int stepi = 0; stepi < ring && static_cast<int>(pts.size()) < n_nodes; ++stepi) {
        double x = spacing * (q + r / 2.0);
        double y = spacing * (std::sqrt(3.0) / 2.0) * r;
        pts.emplace_back(x, y);
        q += dq[side];
        r += dr[side];
      }
    }
    ++ring;
  }
  Matrix m(n_nodes, 2);
  for (int i = 0; i < n_nodes; ++i) {
    m(i, 0) = pts[static_cast<std::size_t>(i)].first;
    m(i, 1) = pts[static_cast<std::size_t>(i)].second;
  }
  return m;
}

struct HexTopologyParams {
  int n_nodes = 7;
  double inter_node_distance_m = 500.0;
  int n_users = 20;
  double coverage_radius_m = 500.0;
  double inner_exclusion_radius_m = 50.0;
  LinkBudget link;
  double mbs_delay_factor = 3.0;
  int max_placement_attempts = 100;
};

// Users are drawn uniformly over a disc spanning the lattice, resampled when
// they land inside a node's exclusion disc or outside every node's coverage.
inline Topology build_hex_topology(const HexTopologyParams& p, std::uint64_t seed) {
  if (p.n_nodes < 1) throw std::invalid_argument("need at least one cache node");
  if (p.inner_exclusion_radius_m >= p.coverage_radius_m)
    throw std::invalid_argument("inner exclusion radius must be below coverage radius");
  Matrix nodes = hex_spiral_positions(p.n_nodes, p.inter_node_distance_m);
  double lattice_radius = 0.0;
  for (int n = 0; n < p.n_nodes; ++n)
    lattice_radius = std::max(lattice_radius, nodes.row(n).norm());
  double area_radius =
      p.n_nodes > 1 ? lattice_radius + p.inter_node_distance_m / 2.0 : p.coverage_radius_m;

  Rng rng(seed);
  Matrix users(p.n_users, 2);
  for (int k = 0; k < p.n_users; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < p.max_placement_attempts; ++attempt) {
      // uniform over the disc
      double u = rng.uniform();
      double theta = rng.uniform(0.0, 2.0 * M_PI);
      double radius = area_radius * std::sqrt(u);
      double x = radius * std::cos(theta);
      double y = radius * std::sin(theta);
      bool ok = true;
      bool covered = false;
      for (int n = 0; n < p.n_nodes && ok; ++n) {
        double dx = x - nodes(n, 0), dy = y - nodes(n, 1);
        double d = std::hypot(dx, dy);
        if (d < p.inner_exclusion_radius_m) ok = false;
        if (d <= p.coverage_radius_m) covered = true;
      }
      if (ok && covered) {
        users(k, 0) = x;
        users(k, 1) = y;
        placed = true;
        break;
      }
    }
    if (!placed)
      throw std::runtime_error("user placement failed: no covered position found for user " +
                               std::to_string(k));
  }
  return make_topology(nodes, users, p.coverage_radius_m, p.link, p.mbs_delay_factor);
}

// Delay for one user to assemble a whole file from its reachable nodes in
// ascending delay order, with the MBS covering any shortfall. Computed as
// the maximum over truncation depths of the partial-download delay, which
// equals greedy sequential downloading.
inline double file_delay(const Topology& topo, const CacheMatrix& cache, int user, int file) {
  const auto& order = topo.reachable[static_cast<std::size_t>(user)];
  const double B = cache.file_size_bits;
  double best = 0.0;
  double taken = 0.0;      // fraction collected before node j
  double partial = 0.0;    // sum of fraction * delay over nodes before j
  for (std::size_t j = 0; j < order.size(); ++j) {
    int node = order[j];
    double dj = topo.per_bit_delay(user, node);
    double total = B * (partial + (1.0 - taken) * dj);
    best = std::max(best, total);
    if (node != 0) {
      double frac = cache.fractions(node - 1, file);
      partial += frac * dj;
      taken += frac;
    }
  }
  return best;
}

// Total delay to serve the per-user demand counts of one slot.
inline double transmission_cost(const Topology& topo, const CacheMatrix& cache,
                                const Matrix& demand /* K x F */) {
  if (demand.rows() != topo.num_users() || demand.cols() != cache.num_files())
    throw std::invalid_argument("demand matrix shape mismatch");
  double total = 0.0;
  for (int k = 0; k < demand.rows(); ++k) {
    for (int f = 0; f < demand.cols(); ++f) {
      double d = demand(k, f);
      if (d < 0.0) throw std::invalid_argument("negative demand count");
      if (d > 0.0) total += d * file_delay(topo, cache, k, f);
    }
  }
  return total;
}

// Total positive increment of cached fractions between consecutive slots.
inline double replacement_cost(const Matrix& prev, const Matrix& next) {
  if (prev.rows() != next.rows() || prev.cols() != next.cols())
    throw std::invalid_argument("cache shape mismatch");
  return (next - prev).cwiseMax(0.0).sum();
}

inline double replacement_cost(const CacheMatrix& prev, const CacheMatrix& next) {
  return replacement_cost(prev.fractions, next.fractions);
}

inline double network_cost(double transmission, double replacement, const CostParams& p) {
  if (transmission < 0.0 || replacement < 0.0)
    throw std::invalid_argument("costs must be non-negative");
  return transmission + p.beta * replacement;
}

// Sum of gamma^(t-1) * cost_t. With gamma = 0 this is the first element.
inline double discounted_return(const std::vector<double>& costs, double gamma) {
  double total = 0.0;
  double w = 1.0;
  for (double c : costs) {
    total += w * c;
    w *= gamma;
  }
  return total;
}

inline nlohmann::json Topology::to_json() const {
  nlohmann::json j;
  j["coverage_radius_m"] = coverage_radius;
  auto mat = [](const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < m.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
      rows.push_back(row);
    }
    return rows;
  };
  j["cache_positions"] = mat(cache_positions);
  j["user_positions"] = mat(user_positions);
  j["per_bit_delay"] = mat(per_bit_delay);
  j["reachable"] = reachable;
  return j;
}

inline Topology Topology::from_json(const nlohmann::json& j) {
  Topology t;
  t.coverage_radius = j.at("coverage_radius_m").get<double>();
  auto mat = [](const nlohmann::json& rows) {
    Matrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < rows[r].size(); ++c)
        m(static_cast<int>(r), static_cast<int>(c)) = rows[r][c].get<double>();
    return m;
  };
  t.cache_positions = mat(j.at("cache_positions"));
  t.user_positions = mat(j.at("user_positions"));
  t.per_bit_delay = mat(j.at("per_bit_delay"));
  t.reachable = j.at("reachable").get<std::vector<std::vector<int>>>();
  return t;
}

}  // namespace codedcache
