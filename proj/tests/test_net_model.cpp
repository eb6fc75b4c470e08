#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "codedcache/net_model.hpp"
#include "support/oracles.hpp"

using namespace codedcache;
using codedcache::testing::greedy_download_delay;
using codedcache::testing::relative_error;

namespace {

// Two cache nodes with per-bit delays 1 and 2, MBS delay 6, one user, B = 1.
Topology tiny_two_node_topology() {
  Topology t;
  t.cache_positions = Matrix::Zero(2, 2);
  t.user_positions = Matrix::Zero(1, 2);
  t.coverage_radius = 1.0;
  t.per_bit_delay = Matrix(1, 3);
  t.per_bit_delay << 6.0, 1.0, 2.0;
  t.reachable = {{1, 2, 0}};
  return t;
}

CacheMatrix random_feasible_cache(int nodes, int files, double capacity, double file_size,
                                  Rng& rng) {
  CacheMatrix c = make_cache(nodes, files, capacity, file_size);
  for (int n = 0; n < nodes; ++n) {
    double row_sum = 0.0;
    for (int f = 0; f < files; ++f) {
      double v = rng.uniform();
      c.fractions(n, f) = v;
      row_sum += v;
    }
    if (row_sum > capacity) c.fractions.row(n) *= capacity / row_sum;
  }
  return c;
}

}  // namespace

TEST_CASE("per-bit delay matches an independent link-budget computation") {
  LinkBudget lb;  // 1 W, 0.1 MHz, -152 dBm/Hz, 1 dBi
  double d = per_bit_delay_seconds(0.5, lb);
  CHECK(d == Catch::Approx(1.9820035556557454e-05).epsilon(1e-12));
}

TEST_CASE("per-bit delay decreases with distance") {
  LinkBudget lb;
  CHECK(per_bit_delay_seconds(0.25, lb) < per_bit_delay_seconds(0.5, lb));
  CHECK(per_bit_delay_seconds(0.05, lb) < per_bit_delay_seconds(0.1, lb));
}

TEST_CASE("per-bit delay rejects bad parameters") {
  LinkBudget lb;
  CHECK_THROWS_AS(per_bit_delay_seconds(0.0, lb), std::invalid_argument);
  lb.bandwidth_hz = 0.0;
  CHECK_THROWS_AS(per_bit_delay_seconds(0.5, lb), std::invalid_argument);
  lb = LinkBudget{};
  lb.tx_power_w = -1.0;
  CHECK_THROWS_AS(per_bit_delay_seconds(0.5, lb), std::invalid_argument);
}

TEST_CASE("single-cell topology reaches the node then the MBS") {
  Matrix node(1, 2);
  node << 0.0, 0.0;
  Matrix user(1, 2);
  user << 300.0, 0.0;
  Topology t = make_topology(node, user, 400.0, LinkBudget{});
  REQUIRE(t.reachable.size() == 1);
  CHECK(t.reachable[0] == std::vector<int>{1, 0});
  CHECK(t.per_bit_delay(0, 0) == Catch::Approx(3.0 * t.per_bit_delay(0, 1)));
}

TEST_CASE("hex topology honors coverage, determinism and delay ordering") {
  HexTopologyParams p;
  p.n_nodes = 7;
  p.inter_node_distance_m = 500.0;
  p.n_users = 20;
  p.coverage_radius_m = 500.0;
  p.inner_exclusion_radius_m = 50.0;
  Topology a = build_hex_topology(p, 7);
  Topology b = build_hex_topology(p, 7);
  Topology c = build_hex_topology(p, 8);

  CHECK(a.num_nodes() == 7);
  CHECK(a.num_users() == 20);
  CHECK(a.user_positions == b.user_positions);
  CHECK(a.per_bit_delay == b.per_bit_delay);
  CHECK(a.user_positions != c.user_positions);

  double max_cache_delay = 0.0;
  for (int k = 0; k < a.num_users(); ++k) {
    const auto& reach = a.reachable[static_cast<std::size_t>(k)];
    REQUIRE(reach.size() >= 2);  // at least one cache node plus the MBS
    CHECK(reach.back() == 0);
    for (std::size_t j = 0; j + 1 < reach.size(); ++j) {
      CHECK(reach[j] != 0);
      CHECK(a.per_bit_delay(k, reach[j]) <= a.per_bit_delay(k, reach[j + 1]));
      CHECK(a.per_bit_delay(k, 0) > a.per_bit_delay(k, reach[j]));
    }
    for (int n = 0; n <= a.num_nodes(); ++n) {
      CHECK(a.per_bit_delay(k, n) > 0.0);
      CHECK(std::isfinite(a.per_bit_delay(k, n)));
      if (n > 0) max_cache_delay = std::max(max_cache_delay, a.per_bit_delay(k, n));
    }
  }
  for (int k = 0; k < a.num_users(); ++k)
    CHECK(a.per_bit_delay(k, 0) == Catch::Approx(3.0 * max_cache_delay));
}

TEST_CASE("placement fails when no position can be covered") {
  HexTopologyParams p;
  p.n_nodes = 1;
  p.n_users = 1;
  p.coverage_radius_m = 100.0;
  p.inner_exclusion_radius_m = 99.99;  // essentially nothing left to sample
  CHECK_THROWS_AS(build_hex_topology(p, 3), std::runtime_error);
}

TEST_CASE("file delay matches the worked two-node example") {
  Topology t = tiny_two_node_topology();
  CacheMatrix c = make_cache(2, 1, 1.0, 1.0);
  c.fractions(0, 0) = 0.5;
  c.fractions(1, 0) = 0.25;
  CHECK(file_delay(t, c, 0, 0) == Catch::Approx(2.5));

  c.fractions.setZero();
  CHECK(file_delay(t, c, 0, 0) == Catch::Approx(6.0));  // everything from the MBS

  c.fractions(0, 0) = 1.0;
  CHECK(file_delay(t, c, 0, 0) == Catch::Approx(1.0));  // fully cached nearby
}

TEST_CASE("file delay equals greedy sequential downloading") {
  Rng rng(20240817);
  for (int trial = 0; trial < 1000; ++trial) {
    HexTopologyParams p;
    p.n_nodes = 1 + static_cast<int>(rng.uniform_int(0, 3));
    p.n_users = 1 + static_cast<int>(rng.uniform_int(0, 5));
    p.inter_node_distance_m = 400.0;
    p.coverage_radius_m = 500.0;
    Topology topo = build_hex_topology(p, rng.next_u64());
    int files = 1 + static_cast<int>(rng.uniform_int(0, 4));
    double capacity = rng.uniform(0.5, files);
    CacheMatrix cache = random_feasible_cache(p.n_nodes, files, capacity, 1e5, rng);
    int user = static_cast<int>(rng.uniform_int(0, p.n_users - 1));
    int file = static_cast<int>(rng.uniform_int(0, files - 1));
    double a = file_delay(topo, cache, user, file);
    double b = greedy_download_delay(topo, cache, user, file);
    REQUIRE(relative_error(a, b) < 1e-9);
  }
}

TEST_CASE("file delay is monotone non-increasing in cached fractions") {
  Rng rng(99);
  Topology t = tiny_two_node_topology();
  for (int trial = 0; trial < 200; ++trial) {
    CacheMatrix c = random_feasible_cache(2, 3, 2.0, 1.0, rng);
    int f = static_cast<int>(rng.uniform_int(0, 2));
    double before = file_delay(t, c, 0, f);
    int n = static_cast<int>(rng.uniform_int(0, 1));
    c.fractions(n, f) = std::min(1.0, c.fractions(n, f) + rng.uniform(0.0, 0.5));
    double after = file_delay(t, c, 0, f);
    CHECK(after <= before + 1e-12);
  }
}

TEST_CASE("transmission cost sums demand-weighted file delays") {
  Topology t = tiny_two_node_topology();
  CacheMatrix c = make_cache(2, 1, 1.0, 1.0);
  c.fractions(0, 0) = 0.5;
  c.fractions(1, 0) = 0.25;
  Matrix demand(1, 1);
  demand << 4.0;
  CHECK(transmission_cost(t, c, demand) == Catch::Approx(10.0));

  demand << 0.0;
  CHECK(transmission_cost(t, c, demand) == 0.0);

  Matrix d1 = Matrix::Constant(1, 1, 3.0);
  Matrix d2 = 2.0 * d1;
  CHECK(transmission_cost(t, c, d2) == Catch::Approx(2.0 * transmission_cost(t, c, d1)));

  demand << -1.0;
  CHECK_THROWS_AS(transmission_cost(t, c, demand), std::invalid_argument);
}

TEST_CASE("replacement cost counts positive increments") {
  Matrix prev(1, 2), next(1, 2);
  prev << 0.5, 0.25;
  next << 0.7, 0.1;
  CHECK(replacement_cost(prev, next) == Catch::Approx(0.2));
  CHECK(replacement_cost(prev, prev) == 0.0);

  // filling every node from empty costs N * M
  Matrix zero = Matrix::Zero(3, 4);
  Matrix full = Matrix::Constant(3, 4, 0.5);  // each row sums to M = 2
  CHECK(replacement_cost(zero, full) == Catch::Approx(3.0 * 2.0));

  Matrix bad(2, 2);
  CHECK_THROWS_AS(replacement_cost(prev, bad), std::invalid_argument);
}

TEST_CASE("replacement cost L1 identity") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    Matrix a(3, 4), b(3, 4);
    for (int i = 0; i < a.size(); ++i) {
      a.data()[i] = rng.uniform();
      b.data()[i] = rng.uniform();
    }
    double lhs = replacement_cost(a, b) + replacement_cost(b, a);
    CHECK(lhs == Catch::Approx((a - b).cwiseAbs().sum()));
  }
}

TEST_CASE("network cost") {
  CostParams p;
  p.beta = 1.5;
  CHECK(network_cost(10.0, 0.2, p) == Catch::Approx(10.3));
  p.beta = 0.0;
  CHECK(network_cost(10.0, 123.0, p) == Catch::Approx(10.0));
  p.beta = 1.5;
  CHECK(network_cost(10.0, 0.0, p) == Catch::Approx(10.0));
}

TEST_CASE("discounted return") {
  CHECK(discounted_return({1.0, 1.0, 1.0}, 0.5) == Catch::Approx(1.75));
  CHECK(discounted_return({42.0}, 0.123) == Catch::Approx(42.0));
  CHECK(discounted_return({1.0, 2.0}, 0.0) == Catch::Approx(1.0));
  CHECK(discounted_return({}, 0.9) == 0.0);
}

TEST_CASE("cache matrix invariants") {
  CacheMatrix c = make_cache(2, 3, 1.0, 1.0);
  CHECK(c.valid());
  c.fractions(0, 0) = 1.0 + 1e-12;  // within tolerance
  CHECK(c.valid());
  c.fractions(0, 0) = 1.1;
  CHECK_FALSE(c.valid());
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);

  c = make_cache(2, 3, 1.0, 1.0);
  c.fractions.row(0) << 0.5, 0.4, 0.2;  // row sum 1.1 > M
  CHECK_FALSE(c.valid());
}

TEST_CASE("topology JSON round trip is exact") {
  HexTopologyParams p;
  p.n_nodes = 3;
  p.n_users = 5;
  p.inter_node_distance_m = 400.0;
  Topology a = build_hex_topology(p, 11);
  Topology b = Topology::from_json(a.to_json());
  CHECK(a.cache_positions == b.cache_positions);
  CHECK(a.user_positions == b.user_positions);
  CHECK(a.per_bit_delay == b.per_bit_delay);
  CHECK(a.reachable == b.reachable);
  CHECK(a.coverage_radius == b.coverage_radius);
}
