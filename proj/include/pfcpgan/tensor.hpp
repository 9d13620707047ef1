#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pfcpgan/error.hpp"

namespace pfcpgan {

/// Dense NCHW activation tensor.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(int n, int c, int h, int w) : n_(n), c_(c), h_(h), w_(w), data_(std::size_t(n) * c * h * w, T(0)) {}

  int n() const { return n_; }
  int c() const { return c_; }
  int h() const { return h_; }
  int w() const { return w_; }
  std::size_t size() const { return data_.size(); }
  std::size_t plane() const { return std::size_t(h_) * w_; }
  std::size_t sample_size() const { return std::size_t(c_) * h_ * w_; }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  T* sample(int i) { return data_.data() + std::size_t(i) * sample_size(); }
  const T* sample(int i) const { return data_.data() + std::size_t(i) * sample_size(); }

  T& at(int i, int ch, int y, int x) { return data_[((std::size_t(i) * c_ + ch) * h_ + y) * w_ + x]; }
  const T& at(int i, int ch, int y, int x) const { return data_[((std::size_t(i) * c_ + ch) * h_ + y) * w_ + x]; }

  bool same_shape(const Tensor& o) const { return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_; }
  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  std::string shape_string() const {
    return "(" + std::to_string(n_) + "," + std::to_string(c_) + "," + std::to_string(h_) + "," + std::to_string(w_) + ")";
  }

 private:
  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
  std::vector<T> data_;
};

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* where) {
  if (!a.same_shape(b))
    throw DimensionError(std::string(where) + ": shape " + a.shape_string() + " vs " + b.shape_string());
}

/// One named, shaped parameter array.
template <typename T>
struct ParamArray {
  std::string name;
  std::vector<int> shape;
  std::vector<T> values;

  std::size_t count() const { return values.size(); }
};

/// Ordered collection of parameter arrays belonging to one network.
template <typename T>
class ParamSet {
 public:
  int add(std::string name, std::vector<int> shape) {
    std::size_t n = 1;
    for (int d : shape) n *= std::size_t(d);
    arrays_.push_back({std::move(name), std::move(shape), std::vector<T>(n, T(0))});
    return int(arrays_.size()) - 1;
  }

  std::size_t size() const { return arrays_.size(); }
  ParamArray<T>& operator[](std::size_t i) { return arrays_[i]; }
  const ParamArray<T>& operator[](std::size_t i) const { return arrays_[i]; }
  auto begin() { return arrays_.begin(); }
  auto end() { return arrays_.end(); }
  auto begin() const { return arrays_.begin(); }
  auto end() const { return arrays_.end(); }

  T* data(int i) { return arrays_[std::size_t(i)].values.data(); }
  const T* data(int i) const { return arrays_[std::size_t(i)].values.data(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& a : arrays_) n += a.count();
    return n;
  }

  /// Same names and shapes, all values zero.
  ParamSet zeros_like() const {
    ParamSet out;
    for (const auto& a : arrays_) out.add(a.name, a.shape);
    return out;
  }

  void set_zero() {
    for (auto& a : arrays_) std::fill(a.values.begin(), a.values.end(), T(0));
  }

  const ParamArray<T>* find(const std::string& name) const {
    for (const auto& a : arrays_)
      if (a.name == name) return &a;
    return nullptr;
  }
  ParamArray<T>* find(const std::string& name) {
    for (auto& a : arrays_)
      if (a.name == name) return &a;
    return nullptr;
  }

  bool operator==(const ParamSet& o) const {
    if (arrays_.size() != o.arrays_.size()) return false;
    for (std::size_t i = 0; i < arrays_.size(); ++i) {
      const auto& a = arrays_[i];
      const auto& b = o.arrays_[i];
      if (a.name != b.name || a.shape != b.shape || a.values != b.values) return false;
    }
    return true;
  }

 private:
  std::vector<ParamArray<T>> arrays_;
};

}  // namespace pfcpgan
