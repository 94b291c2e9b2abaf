#pragma once

#include <cmath>
#include <vector>

#include "protoseq/common.hpp"

namespace protoseq {

// Dense row-major rank-2 tensor. Scalars are 1x1, vectors are n x 1 or 1 x n.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<real_t> data;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, real_t(0)) {}
  Tensor(int r, int c, std::vector<real_t> values) : rows(r), cols(c), data(std::move(values)) {
    require(data.size() == static_cast<size_t>(r) * c, "tensor size mismatch");
  }

  static Tensor scalar(real_t v) {
    Tensor t(1, 1);
    t.data[0] = v;
    return t;
  }

  static Tensor full(int r, int c, real_t v) {
    Tensor t(r, c);
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }

  // Glorot-uniform initialization
  static Tensor xavier(int r, int c, RandomSource& rng) {
    Tensor t(r, c);
    double limit = std::sqrt(6.0 / (r + c));
    for (auto& v : t.data) v = static_cast<real_t>(rng.uniform(-limit, limit));
    return t;
  }

  static Tensor randn(int r, int c, RandomSource& rng, double stddev = 1.0) {
    Tensor t(r, c);
    for (auto& v : t.data) v = static_cast<real_t>(rng.normal() * stddev);
    return t;
  }

  size_t numel() const { return data.size(); }

  real_t& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  real_t at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  bool all_finite() const {
    for (real_t v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline Tensor transposed(const Tensor& a) {
  Tensor t(a.cols, a.rows);
  for (int r = 0; r < a.rows; ++r)
    for (int c = 0; c < a.cols; ++c) t.at(c, r) = a.at(r, c);
  return t;
}

inline double dot(const Tensor& a, const Tensor& b) {
  require(a.numel() == b.numel(), "dot: size mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) s += static_cast<double>(a.data[i]) * b.data[i];
  return s;
}

inline double l2_norm(const Tensor& a) { return std::sqrt(dot(a, a)); }

}  // namespace protoseq
