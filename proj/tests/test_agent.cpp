#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "codedcache/agent.hpp"
#include "support/gradcheck.hpp"

using namespace codedcache;
using codedcache::testing::copy_tensors;
using codedcache::testing::finite_difference_check;

namespace {

AgentConfig tiny_agent_config() {
  AgentConfig cfg;
  cfg.actor_hidden = {16, 12};
  cfg.critic_branch_units = 16;
  cfg.critic_hidden2 = 8;
  cfg.minibatch = 8;
  cfg.buffer_size = 64;
  return cfg;
}

Matrix random_row(int cols, Rng& rng, double lo = 0.05, double hi = 0.95) {
  Matrix m(1, cols);
  for (int c = 0; c < cols; ++c) m(0, c) = rng.uniform(lo, hi);
  return m;
}

Topology tiny_topology(int nodes, int users, std::uint64_t seed) {
  HexTopologyParams p;
  p.n_nodes = nodes;
  p.n_users = users;
  p.inter_node_distance_m = 400.0;
  p.coverage_radius_m = 500.0;
  return build_hex_topology(p, seed);
}

}  // namespace

TEST_CASE("scaling matches the worked examples") {
  Matrix raw(1, 4);
  raw << 0.9, 0.9, 0.9, 0.9;
  Matrix out = scale_rows_to_capacity(raw, 1, 4, 2.0);
  for (int f = 0; f < 4; ++f) CHECK(out(0, f) == Catch::Approx(0.5));

  Matrix raw2(1, 3);
  raw2 << 0.8, 0.1, 0.1;
  Matrix out2 = scale_rows_to_capacity(raw2, 1, 3, 2.0);
  CHECK(out2(0, 0) == Catch::Approx(1.0));
  CHECK(out2(0, 1) == Catch::Approx(0.2));
  CHECK(out2(0, 2) == Catch::Approx(0.2));
  CHECK(out2.row(0).sum() <= 2.0);

  Matrix fixed(1, 2);
  fixed << 0.75, 0.25;  // already sums to the budget
  Matrix out3 = scale_rows_to_capacity(fixed, 1, 2, 1.0);
  CHECK(out3(0, 0) == Catch::Approx(0.75));
  CHECK(out3(0, 1) == Catch::Approx(0.25));

  Matrix zero = Matrix::Zero(1, 3);
  CHECK(scale_rows_to_capacity(zero, 1, 3, 1.0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("scaling is invariant to the magnitude of the raw outputs") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix raw = random_row(6, rng);
    double c = rng.uniform(0.1, 5.0);
    Matrix a = scale_rows_to_capacity(raw, 2, 3, 1.5);
    Matrix b = scale_rows_to_capacity(c * raw, 2, 3, 1.5);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("scaled outputs always satisfy capacity and box constraints") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    int nodes = 1 + static_cast<int>(rng.uniform_int(0, 2));
    int files = 1 + static_cast<int>(rng.uniform_int(0, 4));
    double capacity = rng.uniform(0.3, files);
    Matrix raw(1, nodes * files);
    for (int i = 0; i < raw.cols(); ++i) raw(0, i) = rng.uniform(0.0, 1.0);
    Matrix out = scale_rows_to_capacity(raw, nodes, files, capacity);
    for (int n = 0; n < nodes; ++n) {
      double sum = out.row(0).segment(n * files, files).sum();
      CHECK(sum <= capacity + 1e-9);
    }
    CHECK(out.minCoeff() >= 0.0);
    CHECK(out.maxCoeff() <= 1.0);
  }
}

TEST_CASE("scaling backward matches finite differences") {
  Rng rng(4);
  const int nodes = 2, files = 3;
  const double capacity = 1.2;
  for (int trial = 0; trial < 20; ++trial) {
    Matrix raw = random_row(nodes * files, rng, 0.1, 0.9);
    // keep away from the clip kink so central differences are valid
    ScaleCache cache;
    Matrix out = scale_rows_to_capacity(raw, nodes, files, capacity, &cache);
    bool near_kink = false;
    for (int i = 0; i < out.cols(); ++i)
      if (std::abs(out(0, i) - 1.0) < 1e-3) near_kink = true;
    if (near_kink) continue;

    Matrix weights = random_row(nodes * files, rng, -1.0, 1.0);
    Matrix draw = scale_rows_backward(cache, weights, nodes, files, capacity);
    const double h = 1e-6;
    for (int i = 0; i < raw.cols(); ++i) {
      Matrix up = raw, down = raw;
      up(0, i) += h;
      down(0, i) -= h;
      double f_up = (scale_rows_to_capacity(up, nodes, files, capacity).array() *
                     weights.array()).sum();
      double f_down = (scale_rows_to_capacity(down, nodes, files, capacity).array() *
                       weights.array()).sum();
      double fd = (f_up - f_down) / (2.0 * h);
      CHECK(draw(0, i) == Catch::Approx(fd).margin(1e-5));
    }
  }
}

TEST_CASE("state encoding concatenates demand and cache with a running max") {
  AgentConfig cfg = tiny_agent_config();
  SddpgAgent agent(cfg, 2, 2, 1.0, 7);
  CHECK(agent.state_dim() == 6);

  Vector demand = Vector::Zero(2);
  Matrix cache = Matrix::Zero(2, 2);
  Vector s = agent.encode_state(demand, cache);
  CHECK(s.cwiseAbs().maxCoeff() == 0.0);

  demand << 4.0, 2.0;
  cache << 0.5, 0.25, 0.0, 1.0;
  s = agent.encode_state(demand, cache);
  CHECK(s(0) == Catch::Approx(1.0));   // normalized by the running max 4
  CHECK(s(1) == Catch::Approx(0.5));
  CHECK(agent.decode_cache(s) == cache);

  demand << 2.0, 1.0;  // running max stays at 4
  s = agent.encode_state(demand, cache);
  CHECK(s(0) == Catch::Approx(0.5));
}

TEST_CASE("acting without noise is deterministic, with noise explores") {
  AgentConfig cfg = tiny_agent_config();
  SddpgAgent agent(cfg, 3, 2, 1.5, 11);
  Vector demand(3);
  demand << 1.0, 2.0, 3.0;
  Matrix cache = Matrix::Zero(2, 3);
  Vector s = agent.encode_state(demand, cache);

  CacheMatrix a = agent.act(s, false);
  CacheMatrix b = agent.act(s, false);
  CHECK(a.fractions == b.fractions);

  CacheMatrix c = agent.act(s, true);
  CacheMatrix d = agent.act(s, true);
  CHECK(c.fractions != d.fractions);

  for (const CacheMatrix* m : {&a, &c, &d}) {
    CHECK(m->fractions.minCoeff() >= 0.0);
    CHECK(m->fractions.maxCoeff() <= 1.0);
    for (int n = 0; n < 2; ++n) CHECK(m->fractions.row(n).sum() <= 1.5 + 1e-9);
  }
}

TEST_CASE("OU noise decays deterministically and reverts to zero mean") {
  OuProcess ou(1, 0.15, 0.0, 5);
  Vector one = Vector::Ones(1);
  ou.set_state(one);
  double prev = 1.0;
  for (int i = 0; i < 50; ++i) {
    double x = ou.sample()(0);
    CHECK(x == Catch::Approx(prev * 0.85));
    CHECK(std::abs(x) < std::abs(prev) + 1e-15);
    prev = x;
  }

  OuProcess noisy(1, 0.15, 0.2, 6);
  double sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) sum += noisy.sample()(0);
  CHECK(std::abs(sum / n) < 0.03);  // 3 sigma of the autocorrelated mean

  OuProcess s1(3, 0.15, 0.2, 9), s2(3, 0.15, 0.2, 9);
  for (int i = 0; i < 10; ++i) CHECK(s1.sample() == s2.sample());
}

TEST_CASE("quantization picks the nearest feasible grid vector") {
  Matrix row(1, 2);
  row << 0.3, 0.6;
  Matrix q = quantize_fractions(row, 2, 10.0);
  CHECK(q(0, 0) == Catch::Approx(0.5));
  CHECK(q(0, 1) == Catch::Approx(0.5));

  Matrix on_grid(1, 3);
  on_grid << 0.25, 0.5, 0.0;
  CHECK(quantize_fractions(on_grid, 4, 10.0) == on_grid);

  // l = 1 rounds up only while the budget allows
  Matrix spread(1, 3);
  spread << 0.9, 0.8, 0.6;
  Matrix q1 = quantize_fractions(spread, 1, 2.0);
  CHECK(q1(0, 0) == 1.0);
  CHECK(q1(0, 1) == 1.0);
  CHECK(q1(0, 2) == 0.0);
}

TEST_CASE("exhaustive and greedy quantization agree") {
  Rng rng(13);
  for (int trial = 0; trial < 300; ++trial) {
    int files = 2 + static_cast<int>(rng.uniform_int(0, 5));
    int segments = 1 << rng.uniform_int(0, 2);
    double capacity = rng.uniform(0.5, files * 0.8);
    Vector row(files);
    double sum = 0.0;
    for (int f = 0; f < files; ++f) {
      row(f) = rng.uniform(0.0, 1.0);
      sum += row(f);
    }
    if (sum > capacity) row *= capacity / sum;  // feasible input
    Vector ex = codedcache::detail::quantize_row_exhaustive(row, segments, capacity);
    Vector gr = codedcache::detail::quantize_row_greedy(row, segments, capacity);
    INFO("row " << row.transpose() << " l=" << segments << " M=" << capacity);
    CHECK((ex - gr).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(ex.sum() <= capacity + 1e-9);
  }
}

TEST_CASE("quantized scaled outputs stay within the rounding distance bound") {
  Rng rng(14);
  const int nodes = 3, files = 8;
  const double capacity = 2.0;
  for (int segments : {1, 2, 4}) {
    for (int trial = 0; trial < 50; ++trial) {
      Matrix raw(1, nodes * files);
      for (int i = 0; i < raw.cols(); ++i) raw(0, i) = rng.uniform(0.0, 1.0);
      Matrix scaled = scale_rows_to_capacity(raw, nodes, files, capacity);
      Matrix cache(nodes, files);
      for (int n = 0; n < nodes; ++n) cache.row(n) = scaled.row(0).segment(n * files, files);
      Matrix q = quantize_fractions(cache, segments, capacity);
      double bound = std::sqrt(static_cast<double>(files)) / (2.0 * segments) *
                     std::sqrt(static_cast<double>(nodes));
      CHECK((q - cache).norm() <= bound + 1e-9);
      for (int n = 0; n < nodes; ++n) CHECK(q.row(n).sum() <= capacity + 1e-9);
    }
  }
}

TEST_CASE("critic regression drives the loss toward zero on a frozen buffer") {
  AgentConfig cfg = tiny_agent_config();
  cfg.discount = 0.0;  // targets are exactly the rewards
  cfg.critic_lr = 1e-3;
  SddpgAgent agent(cfg, 2, 2, 1.0, 21);
  Rng rng(22);
  for (int i = 0; i < 10; ++i) {
    Vector s(6), s2(6), a(4);
    for (int j = 0; j < 6; ++j) {
      s(j) = rng.uniform();
      s2(j) = rng.uniform();
    }
    for (int j = 0; j < 4; ++j) a(j) = rng.uniform();
    agent.store({s, a, rng.uniform(-2.0, 0.0), s2});
  }
  double initial = *agent.critic_update();
  double final_loss = initial;
  for (int step = 0; step < 2000; ++step) final_loss = *agent.critic_update();
  INFO("initial " << initial << " final " << final_loss);
  CHECK(final_loss < 0.01 * initial);
}

TEST_CASE("critic update is a no-op on an empty buffer") {
  AgentConfig cfg = tiny_agent_config();
  SddpgAgent agent(cfg, 2, 2, 1.0, 23);
  CHECK_FALSE(agent.critic_update().has_value());
}

TEST_CASE("a minibatch of one repeated transition equals a single-sample step") {
  AgentConfig a_cfg = tiny_agent_config();
  a_cfg.minibatch = 32;
  AgentConfig b_cfg = tiny_agent_config();
  b_cfg.minibatch = 1;
  SddpgAgent a(a_cfg, 2, 2, 1.0, 31);
  SddpgAgent b(b_cfg, 2, 2, 1.0, 31);
  Vector s = Vector::LinSpaced(6, 0.0, 1.0), s2 = Vector::LinSpaced(6, 1.0, 0.0);
  Vector act = Vector::LinSpaced(4, 0.1, 0.7);
  a.store({s, act, -1.5, s2});
  b.store({s, act, -1.5, s2});
  a.critic_update();
  b.critic_update();
  auto pa = a.critic().params(), pb = b.critic().params();
  for (std::size_t i = 0; i < pa.size(); ++i)
    CHECK((*pa[i] - *pb[i]).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("actor update ascends the critic and vanishes under a zero critic") {
  Rng rng(41);
  int increases = 0;
  const int trials = 100;
  for (int trial = 0; trial < trials; ++trial) {
    AgentConfig cfg = tiny_agent_config();
    cfg.actor_lr = 1e-6;
    SddpgAgent agent(cfg, 2, 2, 1.0, 1000 + static_cast<std::uint64_t>(trial));
    for (int i = 0; i < 8; ++i) {
      Vector s(6), s2(6), a(4);
      for (int j = 0; j < 6; ++j) {
        s(j) = rng.uniform();
        s2(j) = rng.uniform();
      }
      for (int j = 0; j < 4; ++j) a(j) = rng.uniform();
      agent.store({s, a, rng.uniform(-1.0, 0.0), s2});
    }
    agent.critic_update();  // draws the minibatch the actor update reuses

    auto mean_q = [&] {
      // objective the actor ascends, recomputed from scratch
      Matrix states(8, 6);
      for (int i = 0; i < 8; ++i) states.row(i) = agent.buffer()[static_cast<std::size_t>(i)].state.transpose();
      Matrix actions = agent.actor().forward_scaled(states);
      return agent.critic().forward(states, actions).mean();
    };
    double before = mean_q();
    agent.actor_update();
    if (mean_q() > before) ++increases;
  }
  CHECK(increases >= 95);

  AgentConfig cfg = tiny_agent_config();
  SddpgAgent agent(cfg, 2, 2, 1.0, 55);
  for (Matrix* p : agent.critic().params()) p->setZero();
  Vector s = Vector::Constant(6, 0.5), a = Vector::Constant(4, 0.25);
  agent.store({s, a, -1.0, s});
  agent.critic_update();
  for (Matrix* p : agent.critic().params()) p->setZero();
  CHECK(agent.actor_update() == 0.0);
}

TEST_CASE("composed actor gradient matches finite differences through the critic") {
  AgentConfig cfg = tiny_agent_config();
  for (std::uint64_t seed = 60; seed < 64; ++seed) {
    SddpgAgent agent(cfg, 2, 2, 1.0, seed);
    Rng rng(seed + 500);
    Matrix states(3, 6);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 6; ++j) states(i, j) = rng.uniform(0.05, 0.95);

    auto objective = [&] {
      Matrix actions = agent.actor().forward_scaled(states);
      return agent.critic().forward(states, actions).mean();
    };

    // analytic gradient of the mean Q wrt actor parameters
    ScaleCache cache;
    Matrix actions = agent.actor().forward_scaled(states, &cache);
    // keep clear of scaling clips and ReLU kinks
    bool near_kink = (actions.array() - 1.0).abs().minCoeff() < 1e-3;
    agent.critic().zero_grad();
    agent.critic().forward(states, actions);
    for (const auto& layer : agent.actor().body().layers())
      if (layer.activation() == Activation::Relu &&
          layer.last_preactivation().cwiseAbs().minCoeff() < 1e-4)
        near_kink = true;
    if (near_kink) continue;
    Matrix dq = Matrix::Constant(3, 1, 1.0 / 3.0);
    Matrix daction = agent.critic().backward(dq).action;
    agent.actor().zero_grad();
    agent.actor().backward_scaled(cache, daction);
    auto analytic = copy_tensors(agent.actor().grads());
    auto stats = finite_difference_check(agent.actor().params(), analytic, objective, 1e-5);
    INFO("seed " << seed << " max rel err " << stats.max_rel_error);
    CHECK(stats.max_rel_error < 1e-3);
  }
}

TEST_CASE("soft updates contract the target distance by 1 - tau") {
  AgentConfig cfg = tiny_agent_config();
  cfg.tau = 0.25;
  SddpgAgent agent(cfg, 2, 2, 1.0, 71);
  // displace the learner, freeze it, and watch the targets track
  for (Matrix* p : agent.actor().params()) p->array() += 0.5;
  auto distance = [&] {
    double d2 = 0.0;
    auto learned = agent.actor().params();
    auto target = agent.actor_target().params();
    for (std::size_t i = 0; i < learned.size(); ++i) d2 += (*learned[i] - *target[i]).squaredNorm();
    return std::sqrt(d2);
  };
  double d0 = distance();
  agent.soft_update_targets();
  double d1 = distance();
  agent.soft_update_targets();
  double d2 = distance();
  CHECK(d1 == Catch::Approx((1.0 - cfg.tau) * d0).epsilon(1e-9));
  CHECK(d2 == Catch::Approx((1.0 - cfg.tau) * d1).epsilon(1e-9));
}

TEST_CASE("actor pre-training memorizes a single sample") {
  AgentConfig cfg = tiny_agent_config();
  cfg.actor_hidden = {32, 16};
  cfg.pretrain_steps = 5000;
  SddpgAgent agent(cfg, 4, 1, 1.0, 81);
  ActorPretrainSample sample;
  Vector demand(4);
  demand << 3.0, 1.0, 0.5, 2.0;
  sample.state = agent.encode_state(demand, Matrix::Zero(1, 4));
  sample.target = Matrix::Constant(1, 4, 0.25);  // row sums to the budget
  agent.pretrain_actor({sample});
  CHECK(agent.pretrain_loss({sample}) < 1e-3);
}

TEST_CASE("actor pre-training shrinks the placement error on per-slot labels") {
  // single cache node: the optimal placement is a well-defined function of
  // the state, free of the tie ambiguity between symmetric nodes
  Topology topo = tiny_topology(1, 6, 90);
  SynthTraceParams sp;
  sp.files = 4;
  sp.slots = 502;
  sp.users = 6;
  sp.patterns = 4;
  sp.period = 12;
  sp.noise_level = 0.15;
  sp.amplitude_min = 2.0;
  sp.amplitude_max = 9.0;
  DemandTrace tr = synth_trace(sp, 91);

  RunInputs in;
  in.topology = &topo;
  in.trace = &tr;
  in.predictions = Matrix::Zero(tr.num_slots, tr.num_files);
  for (int t = 1; t < tr.num_slots; ++t) in.predictions.row(t) = tr.aggregate.row(t - 1);
  // file size keeps per-unit delay savings well above beta, so the optimal
  // placements use the whole budget and stay representable after scaling
  in.initial_cache = make_uniform_cache(1, 4, 2.0, 1e6);
  in.costs.beta = 1.5;
  in.phase1_slots = 500;

  AgentConfig cfg = tiny_agent_config();
  cfg.actor_hidden = {128, 64};
  cfg.minibatch = 32;
  cfg.pretrain_steps = 3000;
  cfg.pretrain_lr = 5e-4;
  SddpgAgent agent(cfg, 4, 1, 2.0, 91);
  auto samples = build_pretrain_samples(agent, in);
  REQUIRE(samples.size() == 500);
  double before = agent.pretrain_loss(samples);
  agent.pretrain_actor(samples);
  double after = agent.pretrain_loss(samples);
  INFO("before " << before << " after " << after);
  CHECK(after * 5.0 <= before);
}

TEST_CASE("replay memory samples uniformly") {
  FifoBuffer<int> buf(50);
  for (int i = 0; i < 50; ++i) buf.push(i);
  Rng rng(101);
  std::vector<long> counts(50, 0);
  const long draws = 100000;
  for (long i = 0; i < draws; ++i) ++counts[static_cast<std::size_t>(buf.sample(rng))];
  double expected = static_cast<double>(draws) / 50.0;
  double chi2 = 0.0;
  for (long c : counts) chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < 90.0);  // 99.9th percentile of chi2(49) is ~85
}

TEST_CASE("environment accounts costs and flags capacity violations") {
  Topology topo = tiny_topology(2, 2, 5);
  DemandTrace tr;
  tr.num_slots = 2;
  tr.num_files = 2;
  tr.aggregate = Matrix::Zero(2, 2);
  tr.aggregate << 2, 0, 1, 1;
  tr = allocate_to_users(tr, 2, 6);
  CacheMatrix initial = make_uniform_cache(2, 2, 1.0, 1e4);
  CostParams params;
  params.beta = 2.0;
  CachingEnv env(topo, tr, params, initial);

  CacheMatrix next = make_cache(2, 2, 1.0, 1e4);
  next.fractions << 1.0, 0.0, 0.0, 1.0;
  auto costs = env.apply(1, next);
  CHECK(costs.replacement == Catch::Approx(1.0));  // two entries rise by 0.5
  CHECK(costs.transmission ==
        Catch::Approx(transmission_cost(topo, next, tr.per_user[1])));
  CHECK(costs.total == Catch::Approx(costs.transmission + 2.0 * costs.replacement));
  CHECK(env.violations() == 0);

  CacheMatrix bad = make_cache(2, 2, 1.0, 1e4);
  bad.fractions << 1.0, 0.5, 0.0, 0.0;  // row sum 1.5 > budget
  env.apply(1, bad);
  CHECK(env.violations() == 1);
}

TEST_CASE("policy runs are deterministic and respect constraints") {
  Topology topo = tiny_topology(2, 3, 17);
  SynthTraceParams sp;
  sp.files = 4;
  sp.slots = 40;
  sp.users = 3;
  sp.patterns = 2;
  sp.period = 8;
  sp.noise_level = 0.2;
  sp.amplitude_min = 2.0;
  sp.amplitude_max = 8.0;
  DemandTrace tr = synth_trace(sp, 18);

  RunInputs in;
  in.topology = &topo;
  in.trace = &tr;
  in.predictions = Matrix::Zero(tr.num_slots, tr.num_files);
  for (int t = 1; t < tr.num_slots; ++t) in.predictions.row(t) = tr.aggregate.row(t - 1);
  in.initial_cache = make_uniform_cache(2, 4, 1.0, 1e4);
  in.costs.beta = 1.0;
  in.phase1_slots = 20;

  AgentConfig cfg = tiny_agent_config();
  cfg.pretrain_steps = 200;
  cfg.pretrain_slots = 20;

  PolicyRunResult a = run_learned_policy(in, cfg, Policy::Sddpg, 99);
  PolicyRunResult b = run_learned_policy(in, cfg, Policy::Sddpg, 99);
  REQUIRE(a.log.size() == b.log.size());
  REQUIRE(!a.log.empty());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].total == b.log[i].total);
    CHECK(a.log[i].slot == b.log[i].slot);
  }
  CHECK(a.constraint_violations == 0);
  CHECK(a.log.front().slot == 21);
  CHECK(a.log.back().slot == 39);

  PolicyRunResult psop = run_per_slot_policy(in);
  CHECK(psop.constraint_violations == 0);
  CHECK(psop.log.size() == a.log.size());

  EvalResult eval = evaluate_learned_policy(in, a.agent->snapshot());
  EvalResult eval2 = evaluate_learned_policy(in, a.agent->snapshot());
  CHECK(eval.avg_total == eval2.avg_total);
  CHECK(eval.constraint_violations == 0);

  EvalResult peval = evaluate_per_slot_policy(in);
  CHECK(peval.avg_total > 0.0);
}

TEST_CASE("ddpg variant runs without pre-training") {
  Topology topo = tiny_topology(1, 2, 8);
  SynthTraceParams sp;
  sp.files = 3;
  sp.slots = 24;
  sp.users = 2;
  sp.patterns = 1;
  sp.period = 6;
  sp.noise_level = 0.1;
  sp.amplitude_min = 2.0;
  sp.amplitude_max = 5.0;
  DemandTrace tr = synth_trace(sp, 9);

  RunInputs in;
  in.topology = &topo;
  in.trace = &tr;
  in.predictions = tr.aggregate;  // oracle-style inputs
  in.initial_cache = make_uniform_cache(1, 3, 1.0, 1e4);
  in.costs.beta = 0.5;
  in.phase1_slots = 10;

  AgentConfig cfg = tiny_agent_config();
  PolicyRunResult r = run_learned_policy(in, cfg, Policy::Ddpg, 5);
  CHECK(r.log.size() == static_cast<std::size_t>(24 - 11 - 1 + 1));
  CHECK(r.constraint_violations == 0);
  CHECK(r.train_avg_total > 0.0);
}
