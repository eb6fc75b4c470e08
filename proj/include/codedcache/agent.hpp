#pragma once

// Cache-placement agent: deterministic policy gradient over the continuous
// placement space, with a sigmoid-output actor followed by a per-node
// capacity scaling stage, a critic whose first hidden layer is split between
// state and action, Ornstein-Uhlenbeck exploration, replay and target
// networks, supervised pre-training from per-slot optimal placements, and a
// segment quantizer for practical coding.
//
// Action layout: a placement (N x F) flattens row-major by node, index
// n * F + f, both in network outputs and stored transitions.

#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "codedcache/linalg.hpp"
#include "codedcache/net_model.hpp"
#include "codedcache/nn.hpp"
#include "codedcache/per_slot.hpp"
#include "codedcache/replay.hpp"
#include "codedcache/rng.hpp"
#include "codedcache/trace.hpp"

namespace codedcache {

struct AgentConfig {
  double discount = 0.99;
  double tau = 5e-4;
  int buffer_size = 1000;
  int minibatch = 32;
  double actor_lr = 1e-5;
  double critic_lr = 5e-4;
  double pretrain_lr = 5e-5;
  double pretrain_lr_decay = 1.0;  // final/initial learning-rate ratio
  int pretrain_steps = 2000;  // supervised Adam steps on the actor
  int pretrain_slots = 499;   // actionable slots driven during phase 1
  std::vector<int> actor_hidden{800, 400};
  int critic_branch_units = 200;
  int critic_hidden2 = 100;
  double ou_theta = 0.15;
  double ou_sigma_start = 0.2;
  double ou_sigma_end = 0.02;
  double reward_scale = 1.0;
  int quantize_segments = 0;  // l; 0 means ideal rateless coding
};

// ---------------------------------------------------------------------------
// scaling stage

struct ScaleCache {
  Matrix raw;           // batch x N*F
  Matrix clipped;       // 1.0 where the scaled entry hit the box
  Matrix row_sum;       // batch x N
  Matrix weighted_sum;  // batch x N, sum over unclipped entries of draw*raw
};

// Per node: multiply the raw outputs by capacity / row-sum, then clip to 1.
// A (numerically) all-zero row maps to zeros.
inline Matrix scale_rows_to_capacity(const Matrix& raw, int nodes, int files, double capacity,
                                     ScaleCache* cache = nullptr) {
  constexpr double kZeroRow = 1e-12;
  Matrix out = Matrix::Zero(raw.rows(), raw.cols());
  Matrix clipped = Matrix::Zero(raw.rows(), raw.cols());
  Matrix row_sum = Matrix::Zero(raw.rows(), nodes);
  for (int b = 0; b < raw.rows(); ++b) {
    for (int n = 0; n < nodes; ++n) {
      double s = raw.row(b).segment(n * files, files).sum();
      row_sum(b, n) = s;
      if (s <= kZeroRow) continue;
      double factor = capacity / s;
      for (int f = 0; f < files; ++f) {
        double v = raw(b, n * files + f) * factor;
        if (v >= 1.0) {
          out(b, n * files + f) = 1.0;
          clipped(b, n * files + f) = 1.0;
        } else {
          out(b, n * files + f) = v;
        }
      }
    }
  }
  if (cache) {
    cache->raw = raw;
    cache->clipped = clipped;
    cache->row_sum = row_sum;
  }
  return out;
}

// Jacobian-transpose product of the scaling stage. Clipped entries are flat;
// unclipped entries see both the direct 1/sum term and the shared -1/sum^2
// coupling through the row sum.
inline Matrix scale_rows_backward(const ScaleCache& cache, const Matrix& dout, int nodes,
                                  int files, double capacity) {
  constexpr double kZeroRow = 1e-12;
  Matrix draw = Matrix::Zero(dout.rows(), dout.cols());
  for (int b = 0; b < dout.rows(); ++b) {
    for (int n = 0; n < nodes; ++n) {
      double s = cache.row_sum(b, n);
      if (s <= kZeroRow) continue;
      double coupled = 0.0;
      for (int f = 0; f < files; ++f) {
        int j = n * files + f;
        if (cache.clipped(b, j) == 0.0) coupled += dout(b, j) * cache.raw(b, j);
      }
      double inv = capacity / s;
      double inv2 = capacity / (s * s);
      for (int f = 0; f < files; ++f) {
        int j = n * files + f;
        double direct = cache.clipped(b, j) == 0.0 ? inv * dout(b, j) : 0.0;
        draw(b, j) = direct - inv2 * coupled;
      }
    }
  }
  return draw;
}

// ---------------------------------------------------------------------------
// quantization to multiples of 1/l

namespace detail {

struct QuantizedRow {
  Vector values;
  double distance2 = 0.0;
  double sum = 0.0;
};

inline bool quantized_better(const QuantizedRow& a, const QuantizedRow& b) {
  if (a.distance2 < b.distance2 - 1e-15) return true;
  if (a.distance2 > b.distance2 + 1e-15) return false;
  if (a.sum < b.sum - 1e-12) return true;
  if (a.sum > b.sum + 1e-12) return false;
  // equal distance and load: prefer ceiling earlier files
  for (int i = 0; i < a.values.size(); ++i) {
    if (a.values(i) > b.values(i)) return true;
    if (a.values(i) < b.values(i)) return false;
  }
  return false;
}

// Exhaustive floor/ceil search over the fractional entries of one node row.
inline Vector quantize_row_exhaustive(const Vector& row, int segments, double capacity) {
  const double unit = 1.0 / segments;
  const int files = static_cast<int>(row.size());
  Vector floors(files), residual(files);
  std::vector<int> fractional;
  for (int f = 0; f < files; ++f) {
    double scaled = row(f) * segments;
    double fl = std::floor(scaled + 1e-9);
    floors(f) = fl * unit;
    residual(f) = scaled - fl;
    if (residual(f) > 1e-9) fractional.push_back(f);
  }
  QuantizedRow best;
  best.values = floors;
  best.sum = floors.sum();
  best.distance2 = (floors - row).squaredNorm();
  QuantizedRow current = best;
  auto recurse = [&](auto&& self, std::size_t i) -> void {
    if (i == fractional.size()) {
      if (quantized_better(current, best)) best = current;
      return;
    }
    int f = fractional[i];
    self(self, i + 1);  // keep the floor
    if (current.sum + unit <= capacity + 1e-9) {
      double old = current.values(f);
      double ceil_v = floors(f) + unit;
      current.distance2 += (ceil_v - row(f)) * (ceil_v - row(f)) - (old - row(f)) * (old - row(f));
      current.values(f) = ceil_v;
      current.sum += unit;
      self(self, i + 1);
      current.values(f) = old;
      current.sum -= unit;
      current.distance2 +=
          (old - row(f)) * (old - row(f)) - (ceil_v - row(f)) * (ceil_v - row(f));
    }
  };
  recurse(recurse, 0);
  return best.values;
}

// Largest-residual repair: start from the all-floor row (always feasible)
// and ceil entries whose residual exceeds one half, biggest first, while the
// capacity allows.
inline Vector quantize_row_greedy(const Vector& row, int segments, double capacity) {
  const double unit = 1.0 / segments;
  const int files = static_cast<int>(row.size());
  Vector out(files);
  std::vector<std::pair<double, int>> by_residual;
  double sum = 0.0;
  for (int f = 0; f < files; ++f) {
    double scaled = row(f) * segments;
    double fl = std::floor(scaled + 1e-9);
    out(f) = fl * unit;
    sum += out(f);
    double r = scaled - fl;
    if (r > 0.5) by_residual.push_back({-r, f});  // negative for ascending sort
  }
  std::sort(by_residual.begin(), by_residual.end());
  for (const auto& [neg_r, f] : by_residual) {
    if (sum + unit > capacity + 1e-9) break;
    out(f) += unit;
    sum += unit;
  }
  return out;
}

}  // namespace detail

// Nearest placement (per node, L2) with fractions restricted to multiples of
// 1/l, subject to the capacity budget. Exhaustive over the floor/ceil
// alternatives for small catalogues, largest-residual repair otherwise.
inline Matrix quantize_fractions(const Matrix& fractions, int segments, double capacity) {
  if (segments < 1) throw std::invalid_argument("segment count must be >= 1");
  const int files = static_cast<int>(fractions.cols());
  Matrix out(fractions.rows(), files);
  for (int n = 0; n < fractions.rows(); ++n) {
    Vector row = fractions.row(n);
    out.row(n) = files <= 20 ? detail::quantize_row_exhaustive(row, segments, capacity)
                             : detail::quantize_row_greedy(row, segments, capacity);
  }
  return out;
}

inline CacheMatrix quantize_action(const CacheMatrix& cache, int segments) {
  CacheMatrix out = cache;
  out.fractions = quantize_fractions(cache.fractions, segments, cache.capacity);
  return out;
}

// ---------------------------------------------------------------------------
// exploration noise

class OuProcess {
 public:
  OuProcess(int dims, double theta, double sigma, std::uint64_t seed)
      : x_(Vector::Zero(dims)), theta_(theta), sigma_(sigma), rng_(seed) {}

  void reset() { x_.setZero(); }
  void set_state(const Vector& x) { x_ = x; }
  void set_sigma(double sigma) { sigma_ = sigma; }
  double sigma() const { return sigma_; }

  const Vector& sample() {
    for (int i = 0; i < x_.size(); ++i)
      x_(i) += theta_ * (0.0 - x_(i)) + sigma_ * rng_.gaussian();
    return x_;
  }

 private:
  Vector x_;
  double theta_, sigma_;
  Rng rng_;
};

// ---------------------------------------------------------------------------
// networks

class ActorNet {
 public:
  ActorNet(int state_dim, const std::vector<int>& hidden, int nodes, int files, double capacity,
           Rng& rng)
      : nodes_(nodes), files_(files), capacity_(capacity),
        body_(state_dim, hidden, nodes * files, Activation::Relu, Activation::Sigmoid, rng) {}

  Matrix forward_raw(const Matrix& states) { return body_.forward(states); }

  Matrix forward_scaled(const Matrix& states, ScaleCache* cache = nullptr) {
    return scale_rows_to_capacity(forward_raw(states), nodes_, files_, capacity_, cache);
  }

  // Backward through the scaling stage and the body; returns the state grad.
  Matrix backward_scaled(const ScaleCache& cache, const Matrix& dscaled) {
    return body_.backward(scale_rows_backward(cache, dscaled, nodes_, files_, capacity_));
  }

  std::vector<Matrix*> params() { return body_.params(); }
  std::vector<Matrix*> grads() { return body_.grads(); }
  void zero_grad() { body_.zero_grad(); }

  int nodes() const { return nodes_; }
  int files() const { return files_; }
  double capacity() const { return capacity_; }
  FeedForwardNet& body() { return body_; }

 private:
  int nodes_, files_;
  double capacity_;
  FeedForwardNet body_;
};

// First hidden layer split between state and action; the two branch outputs
// are summed before the second hidden layer.
class CriticNet {
 public:
  CriticNet(int state_dim, int action_dim, int branch_units, int hidden2, Rng& rng)
      : state_branch_(state_dim, branch_units, Activation::Relu, rng),
        action_branch_(action_dim, branch_units, Activation::Relu, rng),
        hidden_(branch_units, hidden2, Activation::Relu, rng),
        out_(hidden2, 1, Activation::Linear, rng) {}

  Matrix forward(const Matrix& states, const Matrix& actions) {
    Matrix h = state_branch_.forward(states) + action_branch_.forward(actions);
    return out_.forward(hidden_.forward(h));
  }

  struct InputGrads {
    Matrix state, action;
  };

  InputGrads backward(const Matrix& dq) {
    Matrix dh = hidden_.backward(out_.backward(dq));
    return {state_branch_.backward(dh), action_branch_.backward(dh)};
  }

  std::vector<Matrix*> params() {
    std::vector<Matrix*> out;
    state_branch_.collect_params(out);
    action_branch_.collect_params(out);
    hidden_.collect_params(out);
    out_.collect_params(out);
    return out;
  }
  std::vector<Matrix*> grads() {
    std::vector<Matrix*> out;
    state_branch_.collect_grads(out);
    action_branch_.collect_grads(out);
    hidden_.collect_grads(out);
    out_.collect_grads(out);
    return out;
  }
  void zero_grad() {
    state_branch_.zero_grad();
    action_branch_.zero_grad();
    hidden_.zero_grad();
    out_.zero_grad();
  }

 private:
  DenseLayer state_branch_, action_branch_, hidden_, out_;
};

// ---------------------------------------------------------------------------
// agent

struct Transition {
  Vector state;
  Vector action;
  double reward = 0.0;
  Vector next_state;
};

struct ActorPretrainSample {
  Vector state;
  Matrix target;  // N x F optimal placement
};

// Frozen copy of the deterministic policy, for evaluation passes that must
// not disturb the training state.
struct PolicySnapshot {
  AgentConfig cfg;
  int files = 0, nodes = 0;
  double capacity = 0.0, file_size_bits = 0.0;
  ActorNet actor;
  double demand_norm = 1.0;

  Vector encode_state(const Vector& demand, const Matrix& prev_fractions) {
    demand_norm = std::max(demand_norm, demand.maxCoeff());
    Vector s(files + nodes * files);
    s.head(files) = demand / demand_norm;
    for (int n = 0; n < nodes; ++n)
      s.segment(files + n * files, files) = prev_fractions.row(n).transpose();
    return s;
  }

  CacheMatrix act(const Vector& state) {
    Matrix scaled = scale_rows_to_capacity(actor.forward_raw(state.transpose()), nodes, files,
                                           capacity);
    CacheMatrix cache = make_cache(nodes, files, capacity, file_size_bits);
    for (int n = 0; n < nodes; ++n)
      cache.fractions.row(n) = scaled.row(0).segment(n * files, files);
    return cache;
  }
};

class SddpgAgent {
 public:
  SddpgAgent(const AgentConfig& cfg, int files, int nodes, double capacity, std::uint64_t seed,
             std::optional<std::uint64_t> ou_seed = std::nullopt)
      : cfg_(cfg), files_(files), nodes_(nodes), capacity_(capacity),
        actor_(make_actor(cfg, files, nodes, capacity, seed, "actor-init")),
        critic_(make_critic(cfg, files, nodes, seed, "critic-init")),
        actor_target_(actor_),
        critic_target_(critic_),
        actor_opt_(actor_.params(), cfg.actor_lr),
        critic_opt_(critic_.params(), cfg.critic_lr),
        buffer_(static_cast<std::size_t>(cfg.buffer_size)),
        noise_(nodes * files, cfg.ou_theta, cfg.ou_sigma_start,
               ou_seed ? *ou_seed : derive_seed(seed, "ou")),
        replay_rng_(derive_seed(seed, "replay-sample")),
        pretrain_rng_(derive_seed(seed, "pretrain-sample")) {}

  // The optimizers hold pointers into the networks.
  SddpgAgent(const SddpgAgent&) = delete;
  SddpgAgent& operator=(const SddpgAgent&) = delete;

  PolicySnapshot snapshot() const {
    return {cfg_, files_, nodes_, capacity_, file_size_bits_, actor_, demand_norm_};
  }

  int state_dim() const { return files_ + nodes_ * files_; }
  int action_dim() const { return nodes_ * files_; }

  // State is the predicted demand (normalized by a running maximum for
  // network conditioning) concatenated with the previous placement.
  Vector encode_state(const Vector& demand, const Matrix& prev_fractions) {
    if (demand.size() != files_ || prev_fractions.rows() != nodes_ ||
        prev_fractions.cols() != files_)
      throw std::invalid_argument("state shape mismatch");
    demand_norm_ = std::max({demand_norm_, demand.maxCoeff()});
    Vector s(state_dim());
    s.head(files_) = demand / demand_norm_;
    for (int n = 0; n < nodes_; ++n)
      s.segment(files_ + n * files_, files_) = prev_fractions.row(n).transpose();
    return s;
  }

  Matrix decode_cache(const Vector& state) const {
    Matrix m(nodes_, files_);
    for (int n = 0; n < nodes_; ++n)
      m.row(n) = state.segment(files_ + n * files_, files_).transpose();
    return m;
  }

  CacheMatrix act(const Vector& state, bool with_noise) {
    Matrix raw = actor_.forward_raw(state.transpose());
    if (with_noise) {
      raw += noise_.sample().transpose();
      raw = raw.cwiseMax(0.0).cwiseMin(1.0);
    }
    Matrix scaled = scale_rows_to_capacity(raw, nodes_, files_, capacity_);
    CacheMatrix cache = make_cache(nodes_, files_, capacity_, file_size_bits_);
    for (int n = 0; n < nodes_; ++n)
      cache.fractions.row(n) = scaled.row(0).segment(n * files_, files_);
    return cache;
  }

  // One critic regression step toward the frozen-target bootstrap values.
  // Returns the pre-step loss, or nothing when the buffer is empty.
  std::optional<double> critic_update() {
    if (buffer_.empty()) return std::nullopt;
    sample_minibatch();
    Matrix next_actions = actor_target_.forward_scaled(batch_next_states_);
    Matrix q_next = critic_target_.forward(batch_next_states_, next_actions);
    Matrix y = batch_rewards_ + cfg_.discount * q_next;
    critic_.zero_grad();
    Matrix q = critic_.forward(batch_states_, batch_actions_);
    double loss = mse_loss(q, y);
    critic_.backward(mse_grad(q, y));
    critic_opt_.step(critic_.grads());
    return loss;
  }

  // Deterministic policy-gradient ascent on mean Q(s, mu(s)), with the
  // gradient flowing through the scaling stage. Uses the minibatch drawn by
  // the preceding critic update. Returns the applied gradient norm.
  double actor_update() {
    if (batch_states_.rows() == 0) return 0.0;
    const double batch = static_cast<double>(batch_states_.rows());
    ScaleCache cache;
    Matrix actions = actor_.forward_scaled(batch_states_, &cache);
    critic_.zero_grad();
    critic_.forward(batch_states_, actions);
    // descend on -mean(Q): dQ/dQ_i = -1/B
    Matrix dq = Matrix::Constant(batch_states_.rows(), 1, -1.0 / batch);
    Matrix daction = critic_.backward(dq).action;
    actor_.zero_grad();
    actor_.backward_scaled(cache, daction);
    critic_.zero_grad();  // discard the probe gradients
    double norm2 = 0.0;
    for (Matrix* g : actor_.grads()) norm2 += g->squaredNorm();
    actor_opt_.step(actor_.grads());
    return std::sqrt(norm2);
  }

  void soft_update_targets() {
    soft_update(actor_target_.params(), actor_.params(), cfg_.tau);
    soft_update(critic_target_.params(), critic_.params(), cfg_.tau);
  }

  // Supervised regression of the post-scaling actor output onto per-slot
  // optimal placements; the target actor is synced afterwards.
  void pretrain_actor(const std::vector<ActorPretrainSample>& samples) {
    if (samples.empty()) throw std::invalid_argument("empty pre-training sample set");
    AdamOptimizer opt(actor_.params(), cfg_.pretrain_lr);
    const int batch = cfg_.minibatch;
    Matrix states(batch, state_dim());
    Matrix targets(batch, action_dim());
    for (int step = 0; step < cfg_.pretrain_steps; ++step) {
      double frac = cfg_.pretrain_steps > 1
                        ? static_cast<double>(step) / (cfg_.pretrain_steps - 1)
                        : 0.0;
      opt.set_learning_rate(cfg_.pretrain_lr *
                            (1.0 - (1.0 - cfg_.pretrain_lr_decay) * frac));
      for (int i = 0; i < batch; ++i) {
        const auto& s = samples[static_cast<std::size_t>(
            pretrain_rng_.uniform_int(0, static_cast<long>(samples.size()) - 1))];
        states.row(i) = s.state.transpose();
        for (int n = 0; n < nodes_; ++n)
          targets.row(i).segment(n * files_, files_) = s.target.row(n);
      }
      ScaleCache cache;
      Matrix out = actor_.forward_scaled(states, &cache);
      actor_.zero_grad();
      actor_.backward_scaled(cache, mse_grad(out, targets));
      opt.step(actor_.grads());
    }
    copy_params(actor_target_.params(), actor_.params());
  }

  double pretrain_loss(const std::vector<ActorPretrainSample>& samples) {
    Matrix states(static_cast<int>(samples.size()), state_dim());
    Matrix targets(static_cast<int>(samples.size()), action_dim());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      states.row(static_cast<int>(i)) = samples[i].state.transpose();
      for (int n = 0; n < nodes_; ++n)
        targets.row(static_cast<int>(i)).segment(n * files_, files_) = samples[i].target.row(n);
    }
    return mse_loss(actor_.forward_scaled(states), targets);
  }

  // Fresh replay memory and exploration state for phase 2.
  void reset_for_phase2() {
    buffer_ = ReplayMemory(static_cast<std::size_t>(cfg_.buffer_size));
    noise_.reset();
    batch_states_.resize(0, 0);
  }

  void store(Transition t) { buffer_.push(std::move(t)); }

  using ReplayMemory = FifoBuffer<Transition>;
  ReplayMemory& buffer() { return buffer_; }
  OuProcess& noise() { return noise_; }
  ActorNet& actor() { return actor_; }
  CriticNet& critic() { return critic_; }
  ActorNet& actor_target() { return actor_target_; }
  CriticNet& critic_target() { return critic_target_; }
  const AgentConfig& config() const { return cfg_; }
  double demand_norm() const { return demand_norm_; }
  void set_file_size_bits(double b) { file_size_bits_ = b; }

 private:
  static ActorNet make_actor(const AgentConfig& cfg, int files, int nodes, double capacity,
                             std::uint64_t seed, const char* label) {
    Rng rng(derive_seed(seed, label));
    return ActorNet(files + nodes * files, cfg.actor_hidden, nodes, files, capacity, rng);
  }
  static CriticNet make_critic(const AgentConfig& cfg, int files, int nodes, std::uint64_t seed,
                               const char* label) {
    Rng rng(derive_seed(seed, label));
    return CriticNet(files + nodes * files, nodes * files, cfg.critic_branch_units,
                     cfg.critic_hidden2, rng);
  }

  void sample_minibatch() {
    const int batch = cfg_.minibatch;
    batch_states_.resize(batch, state_dim());
    batch_actions_.resize(batch, action_dim());
    batch_rewards_.resize(batch, 1);
    batch_next_states_.resize(batch, state_dim());
    for (int i = 0; i < batch; ++i) {
      const Transition& t = buffer_.sample(replay_rng_);
      batch_states_.row(i) = t.state.transpose();
      batch_actions_.row(i) = t.action.transpose();
      batch_rewards_(i, 0) = t.reward;
      batch_next_states_.row(i) = t.next_state.transpose();
    }
  }

  AgentConfig cfg_;
  int files_, nodes_;
  double capacity_;
  double file_size_bits_ = 0.0;
  ActorNet actor_;
  CriticNet critic_;
  ActorNet actor_target_;
  CriticNet critic_target_;
  AdamOptimizer actor_opt_, critic_opt_;
  ReplayMemory buffer_;
  OuProcess noise_;
  Rng replay_rng_, pretrain_rng_;
  double demand_norm_ = 1.0;
  Matrix batch_states_, batch_actions_, batch_rewards_, batch_next_states_;
};

// ---------------------------------------------------------------------------
// environment

class CachingEnv {
 public:
  CachingEnv(const Topology& topo, const DemandTrace& trace, CostParams params,
             CacheMatrix initial)
      : topo_(&topo), trace_(&trace), params_(params), cache_(std::move(initial)) {
    if (!trace.has_per_user())
      throw std::invalid_argument("environment needs per-user demands");
  }

  struct StepCosts {
    double transmission = 0.0;
    double replacement = 0.0;
    double total = 0.0;
  };

  StepCosts apply(int slot, const CacheMatrix& next_in) {
    // validity and costs are judged against the environment's own budget and
    // file size, whatever metadata the action carried
    CacheMatrix next = next_in;
    next.capacity = cache_.capacity;
    next.file_size_bits = cache_.file_size_bits;
    if (!next.valid()) ++violations_;
    StepCosts c;
    c.transmission = transmission_cost(*topo_, next,
                                       trace_->per_user[static_cast<std::size_t>(slot)]);
    c.replacement = replacement_cost(cache_, next);
    c.total = network_cost(c.transmission, c.replacement, params_);
    cache_ = std::move(next);
    return c;
  }

  const CacheMatrix& cache() const { return cache_; }
  long violations() const { return violations_; }
  const CostParams& params() const { return params_; }

 private:
  const Topology* topo_;
  const DemandTrace* trace_;
  CostParams params_;
  CacheMatrix cache_;
  long violations_ = 0;
};

// ---------------------------------------------------------------------------
// interaction loops

enum class Policy { PsoP, Sddpg, SddpgR, Ddpg };

inline const char* to_string(Policy p) {
  switch (p) {
    case Policy::PsoP: return "psop";
    case Policy::Sddpg: return "sddpg";
    case Policy::SddpgR: return "sddpg_r";
    case Policy::Ddpg: return "ddpg";
  }
  return "?";
}

struct SlotCost {
  int slot = 0;
  double transmission = 0.0, replacement = 0.0, total = 0.0, running_avg = 0.0;
};

struct PolicyRunResult {
  Policy policy = Policy::Sddpg;
  std::vector<SlotCost> log;  // phase-2 training trajectory
  double train_avg_total = 0.0;
  double eval_avg_total = 0.0, eval_avg_transmission = 0.0, eval_avg_replacement = 0.0;
  long constraint_violations = 0;
  double final_critic_loss = 0.0;
  std::unique_ptr<SddpgAgent> agent;  // null for the per-slot baseline
};

struct RunInputs {
  const Topology* topology = nullptr;
  const DemandTrace* trace = nullptr;
  // d_hat(t) per slot; for the oracle variant these are the actual counts
  Matrix predictions;
  CacheMatrix initial_cache;
  CostParams costs;
  int phase1_slots = 0;  // actionable slots before the measured window
};

namespace detail {

inline int first_phase2_slot(const RunInputs& in) {
  int last = in.trace->num_slots - 1;
  return std::min(in.phase1_slots + 1, last);
}

inline Vector demand_row(const Matrix& m, int t) { return m.row(t).transpose(); }

// One environment interaction at slot t: act with exploration, quantize if
// configured, serve the actual demands, store the transition, learn.
inline CachingEnv::StepCosts interact(SddpgAgent& agent, CachingEnv& env, const RunInputs& in,
                                      int t, bool update_actor, double sigma,
                                      double* critic_loss_out = nullptr) {
  const DemandTrace& tr = *in.trace;
  agent.noise().set_sigma(sigma);
  Vector s = agent.encode_state(demand_row(in.predictions, t), env.cache().fractions);
  CacheMatrix next = agent.act(s, /*with_noise=*/true);
  int l = agent.config().quantize_segments;
  if (l > 0) next = quantize_action(next, l);
  auto costs = env.apply(t, next);
  double reward = -costs.total * agent.config().reward_scale;
  Vector next_demand = t + 1 < tr.num_slots ? demand_row(in.predictions, t + 1)
                                            : Vector(tr.aggregate.row(t).transpose());
  Vector s_next = agent.encode_state(next_demand, next.fractions);
  Vector action(agent.action_dim());
  for (int n = 0; n < next.fractions.rows(); ++n)
    action.segment(n * next.fractions.cols(), next.fractions.cols()) =
        next.fractions.row(n).transpose();
  agent.store({std::move(s), std::move(action), reward, std::move(s_next)});
  auto loss = agent.critic_update();
  if (loss && critic_loss_out) *critic_loss_out = *loss;
  if (update_actor) agent.actor_update();
  agent.soft_update_targets();
  return costs;
}

inline double noise_sigma(const AgentConfig& cfg, int t, int total_slots) {
  if (total_slots <= 2) return cfg.ou_sigma_end;
  double frac = static_cast<double>(t - 1) / static_cast<double>(total_slots - 2);
  frac = std::clamp(frac, 0.0, 1.0);
  return cfg.ou_sigma_start + frac * (cfg.ou_sigma_end - cfg.ou_sigma_start);
}

inline void push_cost(std::vector<SlotCost>& log, int slot, const CachingEnv::StepCosts& c,
                      double& sum) {
  sum += c.total;
  SlotCost sc;
  sc.slot = slot;
  sc.transmission = c.transmission;
  sc.replacement = c.replacement;
  sc.total = c.total;
  sc.running_avg = sum / static_cast<double>(log.size() + 1);
  log.push_back(sc);
}

}  // namespace detail

// Per-slot optimal placements along the prediction chain, as supervised
// labels for the actor: the state pairs each slot's prediction with the
// previous optimal placement.
inline std::vector<ActorPretrainSample> build_pretrain_samples(SddpgAgent& agent,
                                                               const RunInputs& in) {
  std::vector<ActorPretrainSample> samples;
  const DemandTrace& tr = *in.trace;
  CacheMatrix chain = in.initial_cache;
  int last = std::min(in.phase1_slots, tr.num_slots - 1);
  for (int t = 1; t <= last; ++t) {
    Vector demand = detail::demand_row(in.predictions, t);
    PerSlotProblem problem = make_per_slot_problem(
        *in.topology, chain, demand, tr.per_user[static_cast<std::size_t>(t - 1)],
        in.costs.beta);
    PlacementSolution sol = solve_per_slot(problem);
    ActorPretrainSample s;
    s.state = agent.encode_state(demand, chain.fractions);
    s.target = sol.cache.fractions;
    samples.push_back(std::move(s));
    chain = sol.cache;
  }
  return samples;
}

// Run one learned policy over the trace. The first phase1_slots actionable
// slots are the learning preamble: supervised pre-training plus critic
// warm-up with a frozen actor for the pre-trained variants, plain
// start-to-finish learning for the no-pretraining baseline. Costs are
// logged over the remaining slots.
inline PolicyRunResult run_learned_policy(const RunInputs& in, const AgentConfig& cfg,
                                          Policy policy, std::uint64_t seed,
                                          std::optional<std::uint64_t> ou_seed = std::nullopt) {
  if (policy == Policy::PsoP) throw std::invalid_argument("use run_per_slot_policy");
  const DemandTrace& tr = *in.trace;
  const Topology& topo = *in.topology;
  const int total = tr.num_slots;
  const int phase2_start = detail::first_phase2_slot(in);

  PolicyRunResult out;
  out.policy = policy;
  out.agent = std::make_unique<SddpgAgent>(cfg, tr.num_files, topo.num_nodes(),
                                           in.initial_cache.capacity, seed, ou_seed);
  out.agent->set_file_size_bits(in.initial_cache.file_size_bits);
  SddpgAgent& agent = *out.agent;
  CachingEnv env(topo, tr, in.costs, in.initial_cache);

  if (policy == Policy::Sddpg || policy == Policy::SddpgR) {
    auto samples = build_pretrain_samples(agent, in);
    agent.pretrain_actor(samples);
    for (int t = 1; t < phase2_start; ++t)
      detail::interact(agent, env, in, t, /*update_actor=*/false,
                       detail::noise_sigma(cfg, t, total));
    agent.reset_for_phase2();
  } else {
    for (int t = 1; t < phase2_start; ++t)
      detail::interact(agent, env, in, t, /*update_actor=*/true,
                       detail::noise_sigma(cfg, t, total));
  }

  double sum = 0.0;
  double critic_loss = 0.0;
  for (int t = phase2_start; t < total; ++t) {
    double loss = 0.0;
    auto costs = detail::interact(agent, env, in, t, /*update_actor=*/true,
                                  detail::noise_sigma(cfg, t, total), &loss);
    critic_loss = loss;
    detail::push_cost(out.log, t, costs, sum);
  }
  out.train_avg_total = out.log.empty() ? 0.0 : out.log.back().running_avg;
  out.final_critic_loss = critic_loss;
  out.constraint_violations = env.violations();
  return out;
}

// Myopic baseline: re-solve the per-slot problem every slot with the
// predicted demand and the environment's current placement.
inline PolicyRunResult run_per_slot_policy(const RunInputs& in) {
  const DemandTrace& tr = *in.trace;
  const int total = tr.num_slots;
  const int phase2_start = detail::first_phase2_slot(in);
  PolicyRunResult out;
  out.policy = Policy::PsoP;
  CachingEnv env(*in.topology, tr, in.costs, in.initial_cache);
  double sum = 0.0;
  for (int t = 1; t < total; ++t) {
    PerSlotProblem problem = make_per_slot_problem(
        *in.topology, env.cache(), detail::demand_row(in.predictions, t),
        tr.per_user[static_cast<std::size_t>(t - 1)], in.costs.beta);
    PlacementSolution sol = solve_per_slot(problem);
    auto costs = env.apply(t, sol.cache);
    if (t >= phase2_start) detail::push_cost(out.log, t, costs, sum);
  }
  out.train_avg_total = out.log.empty() ? 0.0 : out.log.back().running_avg;
  out.constraint_violations = env.violations();
  return out;
}

struct EvalResult {
  std::vector<SlotCost> log;
  double avg_total = 0.0, avg_transmission = 0.0, avg_replacement = 0.0;
  long constraint_violations = 0;
};

// Deterministic evaluation over the measured window: fresh environment, no
// exploration noise, no learning. Operates on a snapshot so evaluation
// cannot disturb the training state.
inline EvalResult evaluate_learned_policy(const RunInputs& in, PolicySnapshot snap) {
  const DemandTrace& tr = *in.trace;
  const int phase2_start = detail::first_phase2_slot(in);
  CachingEnv env(*in.topology, tr, in.costs, in.initial_cache);
  EvalResult out;
  double sum = 0.0, sum_tx = 0.0, sum_repl = 0.0;
  for (int t = phase2_start; t < tr.num_slots; ++t) {
    Vector s = snap.encode_state(detail::demand_row(in.predictions, t), env.cache().fractions);
    CacheMatrix next = snap.act(s);
    int l = snap.cfg.quantize_segments;
    if (l > 0) next = quantize_action(next, l);
    auto costs = env.apply(t, next);
    sum_tx += costs.transmission;
    sum_repl += costs.replacement;
    detail::push_cost(out.log, t, costs, sum);
  }
  std::size_t n = out.log.size();
  if (n > 0) {
    out.avg_total = sum / static_cast<double>(n);
    out.avg_transmission = sum_tx / static_cast<double>(n);
    out.avg_replacement = sum_repl / static_cast<double>(n);
  }
  out.constraint_violations = env.violations();
  return out;
}

inline EvalResult evaluate_per_slot_policy(const RunInputs& in) {
  const DemandTrace& tr = *in.trace;
  const int phase2_start = detail::first_phase2_slot(in);
  CachingEnv env(*in.topology, tr, in.costs, in.initial_cache);
  EvalResult out;
  double sum = 0.0, sum_tx = 0.0, sum_repl = 0.0;
  for (int t = phase2_start; t < tr.num_slots; ++t) {
    PerSlotProblem problem = make_per_slot_problem(
        *in.topology, env.cache(), detail::demand_row(in.predictions, t),
        tr.per_user[static_cast<std::size_t>(t - 1)], in.costs.beta);
    PlacementSolution sol = solve_per_slot(problem);
    auto costs = env.apply(t, sol.cache);
    sum_tx += costs.transmission;
    sum_repl += costs.replacement;
    detail::push_cost(out.log, t, costs, sum);
  }
  std::size_t n = out.log.size();
  if (n > 0) {
    out.avg_total = sum / static_cast<double>(n);
    out.avg_transmission = sum_tx / static_cast<double>(n);
    out.avg_replacement = sum_repl / static_cast<double>(n);
  }
  out.constraint_violations = env.violations();
  return out;
}

}  // namespace codedcache
