// Copyright (c) 2026 The worldkit authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode autodiff over row-major double matrices. Everything is
// double precision; ops are single-threaded and bitwise deterministic for a
// fixed call sequence.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace worldkit::nn {

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  std::size_t size() const { return data.size(); }
  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  bool all_finite() const;
};

/// A named, persistent weight tensor with its accumulated gradient.
struct Param {
  std::string name;
  Matrix value;
  Matrix grad;

  Param() = default;
  Param(std::string n, int r, int c) : name(std::move(n)), value(r, c), grad(r, c) {}
  void zero_grad() { grad.fill(0.0); }
};

/// Deterministic RNG helpers (explicit algorithms, stable across platforms
/// with the same libstdc++ mt19937_64 stream).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

  std::uint64_t next_u64();
  double uniform();                 // [0, 1)
  double normal(double mean, double stddev);
  int uniform_int(int n);           // [0, n)
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      std::swap(v[i], v[uniform_int(i + 1)]);
    }
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

enum class Reduction { Mean, Sum };

/// One cross-entropy supervision term: weight * nll(target | logits[row]).
struct Supervision {
  int row = 0;
  int target = 0;
  double weight = 1.0;
};

/// Reverse-mode tape. Values are indices into the tape's node list; backward
/// closures run in reverse creation order. One tape per forward pass.
class Tape {
 public:
  struct Value {
    int idx = -1;
    bool valid() const { return idx >= 0; }
  };

  Value input(Matrix m);                 // leaf, no gradient tracking
  Value param(Param& p);                 // leaf, grads accumulate into p.grad

  Value matmul(Value a, Value b);        // a(n,k) * b(k,m)
  Value matmul_nt(Value a, Value b);     // a(n,k) * b(m,k)^T
  Value add(Value a, Value b);           // same shape
  Value add_row(Value a, Value bias);    // bias is (1, cols), broadcast over rows
  Value scale(Value a, double s);
  Value mul_const(Value a, const Matrix& m);  // elementwise, no grad through m
  Value gelu(Value a);
  Value layer_norm(Value a, Value gain, Value bias);  // row-wise; gain/bias (1, cols)
  /// Row-wise softmax over allowed entries; disallowed entries are exactly 0.
  /// allow == nullptr permits everything. allow has the same shape as a.
  Value softmax_masked(Value a, const std::vector<std::uint8_t>* allow);
  Value gather_rows(Value table, std::vector<int> ids);
  Value concat_rows(Value a, Value b);
  Value slice_rows(Value a, int r0, int r1);
  Value concat_cols(const std::vector<Value>& parts);
  Value slice_cols(Value a, int c0, int c1);
  /// Weighted token cross-entropy; returns a 1x1 loss value.
  Value cross_entropy(Value logits, std::vector<Supervision> sup, Reduction red);

  const Matrix& value(Value v) const { return nodes_[v.idx].value; }
  const Matrix& grad(Value v) const { return nodes_[v.idx].grad; }

  /// Seeds d(loss)/d(loss) = 1 and runs all backward closures.
  void backward(Value loss);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void(Tape&)> back;  // may be empty (leaves)
  };

  Value push(Matrix value, std::function<void(Tape&)> back);
  Matrix& grad_mut(int idx) { return nodes_[idx].grad; }

  std::vector<Node> nodes_;
};

using Value = Tape::Value;

}  // namespace worldkit::nn
