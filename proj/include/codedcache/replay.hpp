#pragma once

// Fixed-capacity FIFO buffer with uniform random sampling, shared by the
// forecaster and the RL agent replay memories.

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "codedcache/rng.hpp"

namespace codedcache {

template <class T>
class FifoBuffer {
 public:
  explicit FifoBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("buffer capacity must be positive");
    data_.reserve(capacity);
  }

  void push(T value) {
    if (data_.size() < capacity_) {
      data_.push_back(std::move(value));
    } else {
      data_[head_] = std::move(value);
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return data_.empty(); }

  // i = 0 is the oldest element.
  const T& operator[](std::size_t i) const {
    if (i >= data_.size()) throw std::out_of_range("buffer index");
    return data_[(head_ + i) % data_.size()];
  }

  const T& sample(Rng& rng) const {
    if (data_.empty()) throw std::logic_error("sampling from an empty buffer");
    return data_[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<long>(data_.size()) - 1))];
  }

 private:
  std::size_t capacity_;
  std::vector<T> data_;
  std::size_t head_ = 0;  // next eviction slot once full
};

}  // namespace codedcache
