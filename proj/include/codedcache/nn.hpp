#pragma once

// Minimal differentiable-network engine: dense and LSTM layers with exact
// batched backpropagation, mean-squared-error loss and Adam. Everything is
// double precision and sized for the small networks used in this project.
//
// Batch convention: activations are (batch x features) matrices. A sequence
// is a vector of per-step input matrices. Biases are stored as (n x 1)
// matrices so all parameters share one tensor type.

#include <cmath>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "codedcache/linalg.hpp"
#include "codedcache/rng.hpp"

namespace codedcache {

enum class Activation { Linear, Relu, Sigmoid };

inline Activation activation_from_string(const std::string& s) {
  if (s == "linear") return Activation::Linear;
  if (s == "relu") return Activation::Relu;
  if (s == "sigmoid") return Activation::Sigmoid;
  throw std::invalid_argument("unknown activation: " + s);
}

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::Linear: return "linear";
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "?";
}

namespace detail {

inline Matrix apply_activation(const Matrix& pre, Activation a) {
  switch (a) {
    case Activation::Linear: return pre;
    case Activation::Relu: return pre.cwiseMax(0.0);
    case Activation::Sigmoid: return ((-pre.array()).exp() + 1.0).inverse().matrix();
  }
  return pre;
}

// Derivative as a function of the pre-activation and the output.
inline Matrix activation_derivative(const Matrix& pre, const Matrix& out, Activation a) {
  switch (a) {
    case Activation::Linear: return Matrix::Ones(pre.rows(), pre.cols());
    case Activation::Relu: return (pre.array() > 0.0).cast<double>().matrix();
    case Activation::Sigmoid: return (out.array() * (1.0 - out.array())).matrix();
  }
  return Matrix::Ones(pre.rows(), pre.cols());
}

inline Matrix uniform_matrix(int rows, int cols, double bound, Rng& rng) {
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform(-bound, bound);
  return m;
}

}  // namespace detail

class DenseLayer {
 public:
  DenseLayer(int in, int out, Activation act, Rng& rng)
      : in_(in), out_(out), act_(act) {
    double bound = 1.0 / std::sqrt(static_cast<double>(in));
    W = detail::uniform_matrix(out, in, bound, rng);
    b = Matrix::Zero(out, 1);
    gW = Matrix::Zero(out, in);
    gb = Matrix::Zero(out, 1);
  }

  int input_size() const { return in_; }
  int output_size() const { return out_; }
  Activation activation() const { return act_; }

  Matrix forward(const Matrix& x) {
    if (x.cols() != in_) throw std::invalid_argument("dense input width mismatch");
    x_ = x;
    pre_ = x * W.transpose();
    pre_.rowwise() += b.col(0).transpose();
    y_ = detail::apply_activation(pre_, act_);
    forward_recorded_ = true;
    return y_;
  }

  // Accumulates parameter gradients; returns the input gradient.
  Matrix backward(const Matrix& dy) {
    if (!forward_recorded_) throw std::logic_error("backward without a recorded forward pass");
    Matrix dpre = dy.cwiseProduct(detail::activation_derivative(pre_, y_, act_));
    gW += dpre.transpose() * x_;
    gb += dpre.colwise().sum().transpose();
    return dpre * W;
  }

  void zero_grad() {
    gW.setZero();
    gb.setZero();
  }

  void collect_params(std::vector<Matrix*>& out) {
    out.push_back(&W);
    out.push_back(&b);
  }
  void collect_grads(std::vector<Matrix*>& out) {
    out.push_back(&gW);
    out.push_back(&gb);
  }

  // Pre-activation of the last forward pass (used by gradient checks to
  // stay away from ReLU kinks).
  const Matrix& last_preactivation() const { return pre_; }

  Matrix W, b;
  Matrix gW, gb;

 private:
  int in_, out_;
  Activation act_;
  Matrix x_, pre_, y_;
  bool forward_recorded_ = false;
};

// One LSTM layer with the four gate blocks fused into a single parameter
// matrix over [x_t, h_{t-1}]. Block order: input gate, forget gate, output
// gate, candidate. The forget-gate bias starts at 1.
class LstmLayer {
 public:
  LstmLayer(int in, int hidden, Rng& rng) : in_(in), hidden_(hidden) {
    double bound = 1.0 / std::sqrt(static_cast<double>(in + hidden));
    W = detail::uniform_matrix(4 * hidden, in + hidden, bound, rng);
    b = Matrix::Zero(4 * hidden, 1);
    b.block(hidden, 0, hidden, 1).setConstant(1.0);
    gW = Matrix::Zero(W.rows(), W.cols());
    gb = Matrix::Zero(b.rows(), 1);
  }

  int input_size() const { return in_; }
  int hidden_size() const { return hidden_; }

  void begin_sequence(int batch) {
    h_ = Matrix::Zero(batch, hidden_);
    c_ = Matrix::Zero(batch, hidden_);
    steps_.clear();
  }

  Matrix step(const Matrix& x) {
    if (x.cols() != in_) throw std::invalid_argument("lstm input width mismatch");
    const auto batch = x.rows();
    StepCache s;
    s.z.resize(batch, in_ + hidden_);
    s.z << x, h_;
    Matrix pre = s.z * W.transpose();
    pre.rowwise() += b.col(0).transpose();
    auto block = [&](int i) { return pre.middleCols(i * hidden_, hidden_); };
    s.g = detail::apply_activation(block(0), Activation::Sigmoid);
    s.f = detail::apply_activation(block(1), Activation::Sigmoid);
    s.o = detail::apply_activation(block(2), Activation::Sigmoid);
    s.u = block(3).array().tanh().matrix();
    s.c_prev = c_;
    c_ = s.f.cwiseProduct(c_) + s.g.cwiseProduct(s.u);
    s.tanh_c = c_.array().tanh().matrix();
    h_ = s.o.cwiseProduct(s.tanh_c);
    steps_.push_back(std::move(s));
    return h_;
  }

  std::size_t recorded_steps() const { return steps_.size(); }

  void backward_begin() {
    if (steps_.empty()) throw std::logic_error("backward without a recorded forward pass");
    cursor_ = static_cast<long>(steps_.size()) - 1;
    const auto batch = steps_.back().z.rows();
    dh_carry_ = Matrix::Zero(batch, hidden_);
    dc_carry_ = Matrix::Zero(batch, hidden_);
  }

  // Consumes one cached step (latest first); dh_extra is the gradient
  // arriving at this step's output from above.
  Matrix backward_step(const Matrix& dh_extra) {
    if (cursor_ < 0) throw std::logic_error("backward_step past the start of the sequence");
    const StepCache& s = steps_[static_cast<std::size_t>(cursor_)];
    Matrix dh = dh_extra + dh_carry_;
    Matrix d_o = dh.cwiseProduct(s.tanh_c);
    Matrix dc = dc_carry_ +
                dh.cwiseProduct(s.o).cwiseProduct(
                    (1.0 - s.tanh_c.array().square()).matrix());
    Matrix d_f = dc.cwiseProduct(s.c_prev);
    Matrix d_g = dc.cwiseProduct(s.u);
    Matrix d_u = dc.cwiseProduct(s.g);
    dc_carry_ = dc.cwiseProduct(s.f);

    Matrix dpre(dh.rows(), 4 * hidden_);
    dpre.middleCols(0, hidden_) =
        d_g.cwiseProduct((s.g.array() * (1.0 - s.g.array())).matrix());
    dpre.middleCols(hidden_, hidden_) =
        d_f.cwiseProduct((s.f.array() * (1.0 - s.f.array())).matrix());
    dpre.middleCols(2 * hidden_, hidden_) =
        d_o.cwiseProduct((s.o.array() * (1.0 - s.o.array())).matrix());
    dpre.middleCols(3 * hidden_, hidden_) =
        d_u.cwiseProduct((1.0 - s.u.array().square()).matrix());

    gW += dpre.transpose() * s.z;
    gb += dpre.colwise().sum().transpose();
    Matrix dz = dpre * W;
    dh_carry_ = dz.rightCols(hidden_);
    --cursor_;
    return dz.leftCols(in_);
  }

  void zero_grad() {
    gW.setZero();
    gb.setZero();
  }

  void collect_params(std::vector<Matrix*>& out) {
    out.push_back(&W);
    out.push_back(&b);
  }
  void collect_grads(std::vector<Matrix*>& out) {
    out.push_back(&gW);
    out.push_back(&gb);
  }

  Matrix W, b;
  Matrix gW, gb;

 private:
  struct StepCache {
    Matrix z, g, f, o, u, c_prev, tanh_c;
  };

  int in_, hidden_;
  Matrix h_, c_;
  std::vector<StepCache> steps_;
  long cursor_ = -1;
  Matrix dh_carry_, dc_carry_;
};

class FeedForwardNet {
 public:
  FeedForwardNet() = default;
  FeedForwardNet(int input, const std::vector<int>& hidden, int output,
                 Activation hidden_act, Activation output_act, Rng& rng) {
    int in = input;
    for (int h : hidden) {
      layers_.emplace_back(in, h, hidden_act, rng);
      in = h;
    }
    layers_.emplace_back(in, output, output_act, rng);
  }

  Matrix forward(const Matrix& x) {
    Matrix cur = x;
    for (auto& l : layers_) cur = l.forward(cur);
    return cur;
  }

  // Returns the gradient with respect to the network input.
  Matrix backward(const Matrix& dy) {
    Matrix cur = dy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) cur = it->backward(cur);
    return cur;
  }

  void zero_grad() {
    for (auto& l : layers_) l.zero_grad();
  }

  std::vector<Matrix*> params() {
    std::vector<Matrix*> out;
    for (auto& l : layers_) l.collect_params(out);
    return out;
  }
  std::vector<Matrix*> grads() {
    std::vector<Matrix*> out;
    for (auto& l : layers_) l.collect_grads(out);
    return out;
  }

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  int input_size() const { return layers_.front().input_size(); }
  int output_size() const { return layers_.back().output_size(); }

 private:
  std::vector<DenseLayer> layers_;
};

// Stacked LSTM layers with a dense head applied to the final step's output.
class LstmNet {
 public:
  LstmNet() = default;
  LstmNet(int input, const std::vector<int>& hidden, int output, Rng& rng) {
    if (hidden.empty()) throw std::invalid_argument("need at least one LSTM layer");
    int in = input;
    for (int h : hidden) {
      layers_.emplace_back(in, h, rng);
      in = h;
    }
    head_ = std::make_unique<DenseLayer>(in, output, Activation::Linear, rng);
  }
  LstmNet(const LstmNet&) = delete;
  LstmNet& operator=(const LstmNet&) = delete;
  LstmNet(LstmNet&&) = default;
  LstmNet& operator=(LstmNet&&) = default;

  // xs: one (batch x input) matrix per time step. State is reset per call.
  Matrix forward(const std::vector<Matrix>& xs) {
    if (xs.empty()) throw std::invalid_argument("empty input sequence");
    const auto batch = xs.front().rows();
    for (auto& l : layers_) l.begin_sequence(static_cast<int>(batch));
    Matrix cur;
    for (const auto& x : xs) {
      cur = x;
      for (auto& l : layers_) cur = l.step(cur);
    }
    seq_len_ = xs.size();
    batch_ = static_cast<int>(batch);
    return head_->forward(cur);
  }

  // Scalar-input convenience: sequence given as (batch x T), one column per step.
  Matrix forward_sequence(const Matrix& seq) {
    std::vector<Matrix> xs;
    xs.reserve(static_cast<std::size_t>(seq.cols()));
    for (int t = 0; t < seq.cols(); ++t) xs.push_back(seq.col(t));
    return forward(xs);
  }

  void backward(const Matrix& dy) {
    Matrix dtop_last = head_->backward(dy);
    for (auto& l : layers_) l.backward_begin();
    for (long t = static_cast<long>(seq_len_) - 1; t >= 0; --t) {
      Matrix d = (t == static_cast<long>(seq_len_) - 1)
                     ? dtop_last
                     : Matrix::Zero(batch_, layers_.back().hidden_size());
      for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) d = it->backward_step(d);
    }
  }

  void zero_grad() {
    for (auto& l : layers_) l.zero_grad();
    head_->zero_grad();
  }

  std::vector<Matrix*> params() {
    std::vector<Matrix*> out;
    for (auto& l : layers_) l.collect_params(out);
    head_->collect_params(out);
    return out;
  }
  std::vector<Matrix*> grads() {
    std::vector<Matrix*> out;
    for (auto& l : layers_) l.collect_grads(out);
    head_->collect_grads(out);
    return out;
  }

  std::vector<LstmLayer>& layers() { return layers_; }
  DenseLayer& head() { return *head_; }

 private:
  std::vector<LstmLayer> layers_;
  std::unique_ptr<DenseLayer> head_;
  std::size_t seq_len_ = 0;
  int batch_ = 0;
};

inline double mse_loss(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw std::invalid_argument("mse shape mismatch");
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

inline Matrix mse_grad(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw std::invalid_argument("mse shape mismatch");
  return 2.0 / static_cast<double>(pred.size()) * (pred - target);
}

class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<Matrix*> params, double lr, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const Matrix* p : params_) {
      m_.push_back(Matrix::Zero(p->rows(), p->cols()));
      v_.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }

  void step(const std::vector<Matrix*>& grads) {
    if (grads.size() != params_.size()) throw std::invalid_argument("grad list mismatch");
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      const Matrix& g = *grads[i];
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
      Matrix m_hat = m_[i] / bc1;
      Matrix v_hat = v_[i] / bc2;
      params_[i]->array() -= lr_ * m_hat.array() / (v_hat.array().sqrt() + eps_);
    }
  }

  long step_count() const { return t_; }
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

 private:
  std::vector<Matrix*> params_;
  std::vector<Matrix> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

// theta' <- tau * theta + (1 - tau) * theta', elementwise over all tensors.
inline void soft_update(const std::vector<Matrix*>& target, const std::vector<Matrix*>& learned,
                        double tau) {
  if (target.size() != learned.size()) throw std::invalid_argument("parameter list mismatch");
  for (std::size_t i = 0; i < target.size(); ++i)
    *target[i] = tau * (*learned[i]) + (1.0 - tau) * (*target[i]);
}

inline void copy_params(const std::vector<Matrix*>& dst, const std::vector<Matrix*>& src) {
  if (dst.size() != src.size()) throw std::invalid_argument("parameter list mismatch");
  for (std::size_t i = 0; i < dst.size(); ++i) *dst[i] = *src[i];
}

// Checkpoints: <prefix>.bin holds all tensors flattened row-major as
// little-endian float64; <prefix>.json describes the shapes.
inline void save_checkpoint(const std::string& prefix, const std::vector<Matrix*>& params,
                            const nlohmann::json& extra = {}) {
  nlohmann::json manifest;
  manifest["version"] = 1;
  manifest["format"] = "float64-le";
  nlohmann::json shapes = nlohmann::json::array();
  std::ofstream bin(prefix + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write " + prefix + ".bin");
  for (const Matrix* p : params) {
    shapes.push_back({{"rows", p->rows()}, {"cols", p->cols()}});
    for (int r = 0; r < p->rows(); ++r)
      for (int c = 0; c < p->cols(); ++c) {
        double v = (*p)(r, c);
        bin.write(reinterpret_cast<const char*>(&v), sizeof(v));
      }
  }
  manifest["tensors"] = shapes;
  if (!extra.is_null() && !extra.empty()) manifest["meta"] = extra;
  std::ofstream mf(prefix + ".json", std::ios::binary);
  if (!mf) throw std::runtime_error("cannot write " + prefix + ".json");
  mf << manifest.dump(2) << "\n";
}

inline void load_checkpoint(const std::string& prefix, const std::vector<Matrix*>& params) {
  std::ifstream mf(prefix + ".json", std::ios::binary);
  if (!mf) throw std::runtime_error("cannot read " + prefix + ".json");
  nlohmann::json manifest = nlohmann::json::parse(mf);
  if (manifest.at("version").get<int>() != 1)
    throw std::runtime_error(prefix + ": unsupported checkpoint version");
  const auto& shapes = manifest.at("tensors");
  if (shapes.size() != params.size())
    throw std::runtime_error(prefix + ": tensor count mismatch");
  std::ifstream bin(prefix + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot read " + prefix + ".bin");
  for (std::size_t i = 0; i < params.size(); ++i) {
    long rows = shapes[i].at("rows").get<long>();
    long cols = shapes[i].at("cols").get<long>();
    if (rows != params[i]->rows() || cols != params[i]->cols())
      throw std::runtime_error(prefix + ": tensor shape mismatch at index " + std::to_string(i));
    for (long r = 0; r < rows; ++r)
      for (long c = 0; c < cols; ++c) {
        double v;
        bin.read(reinterpret_cast<char*>(&v), sizeof(v));
        if (!bin) throw std::runtime_error(prefix + ": truncated checkpoint");
        (*params[i])(r, c) = v;
      }
  }
}

}  // namespace codedcache
