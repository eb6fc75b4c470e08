#pragma once

// Online request forecasting. The main forecaster clusters normalized
// request-history windows (k-means++ seeded, streaming center updates) and
// predicts each cluster with its own small LSTM trained from a replay
// buffer. A per-file LSTM bank and a last-value predictor serve as
// baselines, and NMSE is the shared accuracy metric.
//
// Slot convention: slots are 0-based; the window for a prediction at slot t
// covers slots [t - window, t). The first predictable slot equals the window
// length. Each slot has two phases: predict (before demands are seen) and
// update (after).

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "codedcache/linalg.hpp"
#include "codedcache/nn.hpp"
#include "codedcache/replay.hpp"
#include "codedcache/rng.hpp"
#include "codedcache/trace.hpp"

namespace codedcache {

struct FeatureVector {
  Vector raw;         // the window counts, oldest first
  double scale = 1.0; // max of raw, or 1 for an all-zero window
  Vector normalized;  // raw / scale, entries in [0,1]
  bool all_zero = false;
};

inline FeatureVector make_feature(const DemandTrace& tr, int file, int slot, int window) {
  if (window < 1) throw std::invalid_argument("window must be positive");
  if (slot < window || slot > tr.num_slots)
    throw std::invalid_argument("window error: slot " + std::to_string(slot) +
                                " needs " + std::to_string(window) + " past slots");
  FeatureVector f;
  f.raw = tr.aggregate.block(slot - window, file, window, 1);
  double m = f.raw.maxCoeff();
  f.all_zero = m <= 0.0;
  f.scale = f.all_zero ? 1.0 : m;
  f.normalized = f.raw / f.scale;
  return f;
}

struct ClusterModel {
  Matrix centers;  // C x window
  Vector counts;   // accumulated members per cluster
  int size() const { return static_cast<int>(centers.rows()); }
};

// k-means++ seeding over the normalized features (one row per file), plus a
// first assignment pass to populate the counts.
inline ClusterModel init_centers_kmeanspp(const Matrix& features, int clusters,
                                          std::uint64_t seed) {
  const int n = static_cast<int>(features.rows());
  if (clusters < 1 || clusters > n)
    throw std::invalid_argument("cluster count must be in [1, feature count]");
  Rng rng(seed);
  ClusterModel model;
  model.centers = Matrix::Zero(clusters, features.cols());
  model.counts = Vector::Zero(clusters);

  std::vector<int> chosen;
  chosen.push_back(static_cast<int>(rng.uniform_int(0, n - 1)));
  Vector dist2(n);
  for (int c = 1; c < clusters; ++c) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int j : chosen)
        best = std::min(best, (features.row(i) - features.row(j)).squaredNorm());
      dist2(i) = best;
      total += best;
    }
    int pick;
    if (total <= 0.0) {
      pick = static_cast<int>(rng.uniform_int(0, n - 1));  // all points coincide
    } else {
      double r = rng.uniform(0.0, total);
      pick = n - 1;
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        acc += dist2(i);
        if (r <= acc) {
          pick = i;
          break;
        }
      }
    }
    chosen.push_back(pick);
  }
  for (int c = 0; c < clusters; ++c) model.centers.row(c) = features.row(chosen[static_cast<std::size_t>(c)]);
  for (int i = 0; i < n; ++i) {
    int best = 0;
    double best_d = (features.row(i) - model.centers.row(0)).squaredNorm();
    for (int c = 1; c < clusters; ++c) {
      double d = (features.row(i) - model.centers.row(c)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    model.counts(best) += 1.0;
  }
  return model;
}

// Minimum squared Euclidean distance; ties go to the smaller index.
inline int assign_cluster(const ClusterModel& model, const Vector& normalized) {
  int best = 0;
  double best_d = (normalized.transpose() - model.centers.row(0)).squaredNorm();
  for (int c = 1; c < model.size(); ++c) {
    double d = (normalized.transpose() - model.centers.row(c)).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

// Streaming center update: weighted average of the old center (by its
// accumulated count) and this slot's members.
inline void update_center(ClusterModel& model, int cluster, const std::vector<Vector>& members) {
  if (members.empty()) return;
  double prev_count = model.counts(cluster);
  Vector sum = Vector::Zero(model.centers.cols());
  for (const Vector& m : members) sum += m;
  model.centers.row(cluster) =
      (model.centers.row(cluster) * prev_count + sum.transpose()) /
      (prev_count + static_cast<double>(members.size()));
  model.counts(cluster) += static_cast<double>(members.size());
}

struct PredictorConfig {
  int history_window = 12;  // feature dimension
  int clusters = 4;
  int buffer_size = 1000;
  int minibatch = 32;
  double learning_rate = 5e-4;
  std::vector<int> hidden_units{24, 24, 12};
};

struct TrainingSample {
  Vector feature;  // normalized window
  double target;   // actual count / window scale
};

namespace detail {

// One LSTM plus its replay buffer and optimizer.
struct BankEntry {
  LstmNet net;
  FifoBuffer<TrainingSample> buffer;
  AdamOptimizer optimizer;

  BankEntry(const PredictorConfig& cfg, Rng& init_rng)
      : net(1, cfg.hidden_units, 1, init_rng),
        buffer(static_cast<std::size_t>(cfg.buffer_size)),
        optimizer(net.params(), cfg.learning_rate) {}

  // One Adam step on a uniform minibatch; no-op on an empty buffer.
  bool train_step(int minibatch, Rng& rng) {
    if (buffer.empty()) return false;
    Matrix seq(minibatch, buffer[0].feature.size());
    Matrix target(minibatch, 1);
    for (int i = 0; i < minibatch; ++i) {
      const TrainingSample& s = buffer.sample(rng);
      seq.row(i) = s.feature.transpose();
      target(i, 0) = s.target;
    }
    net.zero_grad();
    Matrix pred = net.forward_sequence(seq);
    net.backward(mse_grad(pred, target));
    optimizer.step(net.grads());
    return true;
  }
};

}  // namespace detail

// Clustered forecaster: one LSTM per cluster of request patterns.
class CLstmForecaster {
 public:
  CLstmForecaster(const PredictorConfig& cfg, int files, std::uint64_t seed)
      : cfg_(cfg), files_(files), seed_(seed),
        sample_rng_(derive_seed(seed, "minibatch")) {
    Rng init_rng(derive_seed(seed, "lstm-init"));
    banks_.reserve(static_cast<std::size_t>(cfg.clusters));
    for (int c = 0; c < cfg.clusters; ++c) banks_.emplace_back(cfg_, init_rng);
  }

  int first_slot() const { return cfg_.history_window; }
  const ClusterModel& clusters() const { return model_; }
  const std::vector<int>& last_assignment() const { return assignment_; }

  // Phase 1: build features, assign clusters, and predict every file.
  Vector predict_slot(const DemandTrace& tr, int slot) {
    build_features(tr, slot);
    if (!initialized_) {
      Matrix feats(files_, cfg_.history_window);
      for (int f = 0; f < files_; ++f)
        feats.row(f) = features_[static_cast<std::size_t>(f)].normalized.transpose();
      model_ = init_centers_kmeanspp(feats, cfg_.clusters, derive_seed(seed_, "kmeans"));
      // counts restart at zero: the online loop's own updates keep the
      // one-feature-per-file-per-slot bookkeeping exact
      model_.counts.setZero();
      initialized_ = true;
    }
    assignment_.resize(static_cast<std::size_t>(files_));
    for (int f = 0; f < files_; ++f)
      assignment_[static_cast<std::size_t>(f)] =
          assign_cluster(model_, features_[static_cast<std::size_t>(f)].normalized);

    Vector out = Vector::Zero(files_);
    for (int c = 0; c < cfg_.clusters; ++c) {
      std::vector<int> members;
      for (int f = 0; f < files_; ++f)
        if (assignment_[static_cast<std::size_t>(f)] == c) members.push_back(f);
      if (members.empty()) continue;
      Matrix seq(static_cast<int>(members.size()), cfg_.history_window);
      for (std::size_t i = 0; i < members.size(); ++i)
        seq.row(static_cast<int>(i)) =
            features_[static_cast<std::size_t>(members[i])].normalized.transpose();
      Matrix pred = banks_[static_cast<std::size_t>(c)].net.forward_sequence(seq);
      for (std::size_t i = 0; i < members.size(); ++i) {
        const FeatureVector& fv = features_[static_cast<std::size_t>(members[i])];
        double value = fv.all_zero ? 0.0 : fv.scale * pred(static_cast<int>(i), 0);
        out(members[i]) = std::max(0.0, value);
      }
    }
    return out;
  }

  // Phase 2: fold this slot's members into the centers, store samples, and
  // run one training step per cluster.
  void update_slot(const DemandTrace& tr, int slot) {
    if (assignment_.empty()) throw std::logic_error("update_slot before predict_slot");
    for (int c = 0; c < cfg_.clusters; ++c) {
      std::vector<Vector> members;
      for (int f = 0; f < files_; ++f)
        if (assignment_[static_cast<std::size_t>(f)] == c)
          members.push_back(features_[static_cast<std::size_t>(f)].normalized);
      update_center(model_, c, members);
    }
    for (int f = 0; f < files_; ++f) {
      const FeatureVector& fv = features_[static_cast<std::size_t>(f)];
      double target = tr.aggregate(slot, f) / fv.scale;
      banks_[static_cast<std::size_t>(assignment_[static_cast<std::size_t>(f)])].buffer.push(
          {fv.normalized, target});
    }
    for (int c = 0; c < cfg_.clusters; ++c)
      banks_[static_cast<std::size_t>(c)].train_step(cfg_.minibatch, sample_rng_);
  }

  detail::BankEntry& bank(int cluster) { return banks_[static_cast<std::size_t>(cluster)]; }

 private:
  void build_features(const DemandTrace& tr, int slot) {
    features_.clear();
    features_.reserve(static_cast<std::size_t>(files_));
    for (int f = 0; f < files_; ++f)
      features_.push_back(make_feature(tr, f, slot, cfg_.history_window));
  }

  PredictorConfig cfg_;
  int files_;
  std::uint64_t seed_;
  ClusterModel model_;
  bool initialized_ = false;
  std::vector<detail::BankEntry> banks_;
  Rng sample_rng_;
  std::vector<FeatureVector> features_;
  std::vector<int> assignment_;
};

// Baseline: an independent LSTM per file, trained only on that file's
// history.
class PerFileLstmForecaster {
 public:
  PerFileLstmForecaster(const PredictorConfig& cfg, int files, std::uint64_t seed)
      : cfg_(cfg), files_(files), sample_rng_(derive_seed(seed, "minibatch")) {
    Rng init_rng(derive_seed(seed, "lstm-init"));
    banks_.reserve(static_cast<std::size_t>(files));
    for (int f = 0; f < files; ++f) banks_.emplace_back(cfg_, init_rng);
  }

  int first_slot() const { return cfg_.history_window; }

  Vector predict_slot(const DemandTrace& tr, int slot) {
    features_.clear();
    Vector out = Vector::Zero(files_);
    for (int f = 0; f < files_; ++f) {
      features_.push_back(make_feature(tr, f, slot, cfg_.history_window));
      const FeatureVector& fv = features_.back();
      Matrix pred = banks_[static_cast<std::size_t>(f)].net.forward_sequence(
          fv.normalized.transpose());
      double value = fv.all_zero ? 0.0 : fv.scale * pred(0, 0);
      out(f) = std::max(0.0, value);
    }
    return out;
  }

  void update_slot(const DemandTrace& tr, int slot) {
    if (features_.empty()) throw std::logic_error("update_slot before predict_slot");
    for (int f = 0; f < files_; ++f) {
      const FeatureVector& fv = features_[static_cast<std::size_t>(f)];
      banks_[static_cast<std::size_t>(f)].buffer.push(
          {fv.normalized, tr.aggregate(slot, f) / fv.scale});
      banks_[static_cast<std::size_t>(f)].train_step(cfg_.minibatch, sample_rng_);
    }
  }

 private:
  PredictorConfig cfg_;
  int files_;
  std::vector<detail::BankEntry> banks_;
  Rng sample_rng_;
  std::vector<FeatureVector> features_;
};

// Baseline: repeat the previous slot's counts.
class LastValueForecaster {
 public:
  LastValueForecaster(const PredictorConfig& cfg, int files, std::uint64_t)
      : window_(cfg.history_window), files_(files) {}
  int first_slot() const { return window_; }
  Vector predict_slot(const DemandTrace& tr, int slot) {
    return tr.aggregate.row(slot - 1).transpose();
  }
  void update_slot(const DemandTrace&, int) {}

 private:
  int window_;
  int files_;
};

// ||predicted - actual||^2 / ||actual||^2. Undefined for an all-zero actual.
inline double nmse(const Vector& predicted, const Vector& actual) {
  double denom = actual.squaredNorm();
  if (denom <= 0.0) throw std::invalid_argument("nmse undefined for an all-zero actual");
  return (predicted - actual).squaredNorm() / denom;
}

struct PredictionRun {
  int first_slot = 0;
  Matrix predictions;            // T x F, zero before first_slot
  Eigen::MatrixXi cluster_of;    // T x F, -1 where not applicable
  std::vector<double> slot_nmse;          // indexed by slot, NaN where skipped/not run
  std::vector<double> running_avg_nmse;   // running mean over evaluated slots
  double average_nmse = 0.0;
  int evaluated_slots = 0;
  int skipped_slots = 0;  // all-zero actual vectors
};

template <class Forecaster>
PredictionRun run_online(Forecaster& forecaster, const DemandTrace& tr) {
  PredictionRun run;
  run.first_slot = forecaster.first_slot();
  run.predictions = Matrix::Zero(tr.num_slots, tr.num_files);
  run.cluster_of = Eigen::MatrixXi::Constant(tr.num_slots, tr.num_files, -1);
  run.slot_nmse.assign(static_cast<std::size_t>(tr.num_slots),
                       std::numeric_limits<double>::quiet_NaN());
  run.running_avg_nmse.assign(static_cast<std::size_t>(tr.num_slots),
                              std::numeric_limits<double>::quiet_NaN());
  double total = 0.0;
  for (int t = run.first_slot; t < tr.num_slots; ++t) {
    Vector pred = forecaster.predict_slot(tr, t);
    run.predictions.row(t) = pred.transpose();
    if constexpr (requires { forecaster.last_assignment(); }) {
      const auto& assign = forecaster.last_assignment();
      for (int f = 0; f < tr.num_files; ++f)
        run.cluster_of(t, f) = assign[static_cast<std::size_t>(f)];
    }
    Vector actual = tr.aggregate.row(t).transpose();
    if (actual.squaredNorm() > 0.0) {
      double e = nmse(pred, actual);
      run.slot_nmse[static_cast<std::size_t>(t)] = e;
      total += e;
      ++run.evaluated_slots;
    } else {
      ++run.skipped_slots;
    }
    if (run.evaluated_slots > 0)
      run.running_avg_nmse[static_cast<std::size_t>(t)] = total / run.evaluated_slots;
    forecaster.update_slot(tr, t);
  }
  run.average_nmse = run.evaluated_slots > 0 ? total / run.evaluated_slots : 0.0;
  return run;
}

// Prediction series for the control loop: last-value fallback before the
// forecaster's first slot (slot 0 predicts zero).
inline Matrix predictions_with_fallback(const PredictionRun& run, const DemandTrace& tr) {
  Matrix out = run.predictions;
  for (int t = 0; t < std::min(run.first_slot, tr.num_slots); ++t) {
    if (t == 0)
      out.row(0).setZero();
    else
      out.row(t) = tr.aggregate.row(t - 1);
  }
  return out;
}

}  // namespace codedcache
