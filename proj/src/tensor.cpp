// Copyright (c) 2026 The worldkit authors
// SPDX-License-Identifier: Apache-2.0

#include "worldkit/tensor.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace worldkit::nn {

bool Matrix::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::uint64_t Rng::next_u64() {
  // splitmix64
  state_ += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal(double mean, double stddev) {
  if (has_spare_) {
    has_spare_ = false;
    return mean + spare_ * stddev;
  }
  double u = 1.0 - uniform();
  double v = uniform();
  double r = std::sqrt(-2.0 * std::log(u));
  double theta = 2.0 * 3.14159265358979323846 * v;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return mean + r * std::cos(theta) * stddev;
}

int Rng::uniform_int(int n) {
  assert(n > 0);
  return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
}

Value Tape::push(Matrix value, std::function<void(Tape&)> back) {
  Node n;
  n.value = std::move(value);
  n.grad = Matrix(n.value.rows, n.value.cols);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Value{static_cast<int>(nodes_.size()) - 1};
}

Value Tape::input(Matrix m) { return push(std::move(m), nullptr); }

Value Tape::param(Param& p) {
  Param* pp = &p;
  Value v = push(p.value, nullptr);
  int self = v.idx;
  nodes_[self].back = [self, pp](Tape& t) {
    const Matrix& g = t.nodes_[self].grad;
    for (std::size_t i = 0; i < g.data.size(); ++i) pp->grad.data[i] += g.data[i];
  };
  return v;
}

Value Tape::matmul(Value a, Value b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  assert(A.cols == B.rows);
  Matrix C(A.rows, B.cols);
  for (int i = 0; i < A.rows; ++i) {
    for (int k = 0; k < A.cols; ++k) {
      double aik = A.at(i, k);
      if (aik == 0.0) continue;
      const double* brow = &B.data[static_cast<std::size_t>(k) * B.cols];
      double* crow = &C.data[static_cast<std::size_t>(i) * C.cols];
      for (int j = 0; j < B.cols; ++j) crow[j] += aik * brow[j];
    }
  }
  Value v = push(std::move(C), nullptr);
  int self = v.idx, ai = a.idx, bi = b.idx;
  nodes_[self].back = [self, ai, bi](Tape& t) {
    const Matrix& A = t.nodes_[ai].value;
    const Matrix& B = t.nodes_[bi].value;
    const Matrix& dC = t.nodes_[self].grad;
    Matrix& dA = t.grad_mut(ai);
    Matrix& dB = t.grad_mut(bi);
    // dA += dC * B^T
    for (int i = 0; i < A.rows; ++i) {
      const double* drow = &dC.data[static_cast<std::size_t>(i) * dC.cols];
      double* darow = &dA.data[static_cast<std::size_t>(i) * dA.cols];
      for (int j = 0; j < B.cols; ++j) {
        double g = drow[j];
        if (g == 0.0) continue;
        for (int k = 0; k < A.cols; ++k) {
          darow[k] += g * B.data[static_cast<std::size_t>(k) * B.cols + j];
        }
      }
    }
    // dB += A^T * dC
    for (int i = 0; i < A.rows; ++i) {
      const double* arow = &A.data[static_cast<std::size_t>(i) * A.cols];
      const double* drow = &dC.data[static_cast<std::size_t>(i) * dC.cols];
      for (int k = 0; k < A.cols; ++k) {
        double av = arow[k];
        if (av == 0.0) continue;
        double* dbrow = &dB.data[static_cast<std::size_t>(k) * dB.cols];
        for (int j = 0; j < dC.cols; ++j) dbrow[j] += av * drow[j];
      }
    }
  };
  return v;
}

Value Tape::matmul_nt(Value a, Value b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  assert(A.cols == B.cols);
  Matrix C(A.rows, B.rows);
  for (int i = 0; i < A.rows; ++i) {
    const double* ar = &A.data[static_cast<std::size_t>(i) * A.cols];
    for (int j = 0; j < B.rows; ++j) {
      const double* br = &B.data[static_cast<std::size_t>(j) * B.cols];
      double s = 0.0;
      for (int k = 0; k < A.cols; ++k) s += ar[k] * br[k];
      C.at(i, j) = s;
    }
  }
  Value v = push(std::move(C), nullptr);
  int self = v.idx, ai = a.idx, bi = b.idx;
  nodes_[self].back = [self, ai, bi](Tape& t) {
    const Matrix& A = t.nodes_[ai].value;
    const Matrix& B = t.nodes_[bi].value;
    const Matrix& dC = t.nodes_[self].grad;
    Matrix& dA = t.grad_mut(ai);
    Matrix& dB = t.grad_mut(bi);
    // C = A * B^T: dA += dC * B ; dB += dC^T * A
    for (int i = 0; i < dC.rows; ++i) {
      const double* arow = &A.data[static_cast<std::size_t>(i) * A.cols];
      double* darow = &dA.data[static_cast<std::size_t>(i) * dA.cols];
      for (int j = 0; j < dC.cols; ++j) {
        double g = dC.at(i, j);
        if (g == 0.0) continue;
        const double* br = &B.data[static_cast<std::size_t>(j) * B.cols];
        for (int k = 0; k < B.cols; ++k) darow[k] += g * br[k];
        double* dbrow = &dB.data[static_cast<std::size_t>(j) * dB.cols];
        for (int k = 0; k < A.cols; ++k) dbrow[k] += g * arow[k];
      }
    }
  };
  return v;
}

Value Tape::add(Value a, Value b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  assert(A.rows == B.rows && A.cols == B.cols);
  Matrix C = A;
  for (std::size_t i = 0; i < C.data.size(); ++i) C.data[i] += B.data[i];
  Value v = push(std::move(C), nullptr);
  int self = v.idx, ai = a.idx, bi = b.idx;
  nodes_[self].back = [self, ai, bi](Tape& t) {
    const Matrix& dC = t.nodes_[self].grad;
    Matrix& dA = t.grad_mut(ai);
    Matrix& dB = t.grad_mut(bi);
    for (std::size_t i = 0; i < dC.data.size(); ++i) {
      dA.data[i] += dC.data[i];
      dB.data[i] += dC.data[i];
    }
  };
  return v;
}

Value Tape::add_row(Value a, Value bias) {
  const Matrix& A = value(a);
  const Matrix& B = value(bias);
  assert(B.rows == 1 && B.cols == A.cols);
  Matrix C = A;
  for (int i = 0; i < C.rows; ++i) {
    for (int j = 0; j < C.cols; ++j) C.at(i, j) += B.at(0, j);
  }
  Value v = push(std::move(C), nullptr);
  int self = v.idx, ai = a.idx, bi = bias.idx;
  nodes_[self].back = [self, ai, bi](Tape& t) {
    const Matrix& dC = t.nodes_[self].grad;
    Matrix& dA = t.grad_mut(ai);
    Matrix& dB = t.grad_mut(bi);
    for (int i = 0; i < dC.rows; ++i) {
      for (int j = 0; j < dC.cols; ++j) {
        dA.at(i, j) += dC.at(i, j);
        dB.at(0, j) += dC.at(i, j);
      }
    }
  };
  return v;
}

Value Tape::scale(Value a, double s) {
  Matrix C = value(a);
  for (double& x : C.data) x *= s;
  Value v = push(std::move(C), nullptr);
  int self = v.idx, ai = a.idx;
  nodes_[self].back = [self, ai, s](Tape& t) {
    const Matrix& dC = t.nodes_[self].grad;
    Matrix& dA = t.grad_mut(ai);
    for (std::size_t i = 0; i < dC.data.size(); ++i) dA.data[i] += s * dC.data[i];
  };
  return v;
}

Value Tape::mul_const(Value a, const Matrix& m) {
  const Matrix& A = value(a);
  assert(A.rows == m.rows && A.cols == m.cols);
  Matrix C = A;
  for (std::size_t i = 0; i < C.data.size(); ++i) C.data[i] *= m.data[i];
  Value v = push(std::move(C), nullptr);
  int self = v.idx, ai = a.idx;
  Matrix mask = m;
  nodes_[self].back = [self, ai, mask](Tape& t) {
    const Matrix& dC = t.nodes_[self].grad;
    Matrix& dA = t.grad_mut(ai);
    for (std::size_t i = 0; i < dC.data.size(); ++i) dA.data[i] += mask.data[i] * dC.data[i];
  };
  return v;
}

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

Value Tape::gelu(Value a) {
  const Matrix& A = value(a);
  Matrix C(A.rows, A.cols);
  for (std::size_t i = 0; i < A.data.size(); ++i) {
    double x = A.data[i];
    C.data[i] = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
  }
  Value v = push(std::move(C), nullptr);
  int self = v.idx, ai = a.idx;
  nodes_[self].back = [self, ai](Tape& t) {
    const Matrix& A = t.nodes_[ai].value;
    const Matrix& dC = t.nodes_[self].grad;
    Matrix& dA = t.grad_mut(ai);
    for (std::size_t i = 0; i < A.data.size(); ++i) {
      double x = A.data[i];
      double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
      double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
      dA.data[i] += dC.data[i] * (cdf + x * pdf);
    }
  };
  return v;
}

Value Tape::layer_norm(Value a, Value gain, Value bias) {
  constexpr double kEps = 1e-5;
  const Matrix& A = value(a);
  const Matrix& G = value(gain);
  const Matrix& B = value(bias);
  assert(G.rows == 1 && G.cols == A.cols && B.rows == 1 && B.cols == A.cols);
  Matrix C(A.rows, A.cols);
  Matrix xhat(A.rows, A.cols);
  std::vector<double> inv_std(A.rows);
  for (int i = 0; i < A.rows; ++i) {
    double mean = 0.0;
    for (int j = 0; j < A.cols; ++j) mean += A.at(i, j);
    mean /= A.cols;
    double var = 0.0;
    for (int j = 0; j < A.cols; ++j) {
      double d = A.at(i, j) - mean;
      var += d * d;
    }
    var /= A.cols;
    double is = 1.0 / std::sqrt(var + kEps);
    inv_std[i] = is;
    for (int j = 0; j < A.cols; ++j) {
      double xh = (A.at(i, j) - mean) * is;
      xhat.at(i, j) = xh;
      C.at(i, j) = G.at(0, j) * xh + B.at(0, j);
    }
  }
  Value v = push(std::move(C), nullptr);
  int self = v.idx, ai = a.idx, gi = gain.idx, bi = bias.idx;
  nodes_[self].back = [self, ai, gi, bi, xhat, inv_std](Tape& t) {
    const Matrix& dC = t.nodes_[self].grad;
    const Matrix& G = t.nodes_[gi].value;
    Matrix& dA = t.grad_mut(ai);
    Matrix& dG = t.grad_mut(gi);
    Matrix& dB = t.grad_mut(bi);
    const int n = dC.cols;
    for (int i = 0; i < dC.rows; ++i) {
      double sum_dxhat = 0.0;
      double sum_dxhat_xhat = 0.0;
      for (int j = 0; j < n; ++j) {
        double dxh = dC.at(i, j) * G.at(0, j);
        sum_dxhat += dxh;
        sum_dxhat_xhat += dxh * xhat.at(i, j);
        dG.at(0, j) += dC.at(i, j) * xhat.at(i, j);
        dB.at(0, j) += dC.at(i, j);
      }
      for (int j = 0; j < n; ++j) {
        double dxh = dC.at(i, j) * G.at(0, j);
        dA.at(i, j) += inv_std[i] * (dxh - sum_dxhat / n - xhat.at(i, j) * sum_dxhat_xhat / n);
      }
    }
  };
  return v;
}

Value Tape::softmax_masked(Value a, const std::vector<std::uint8_t>* allow) {
  const Matrix& A = value(a);
  if (allow) assert(allow->size() == A.data.size());
  Matrix P(A.rows, A.cols);
  for (int i = 0; i < A.rows; ++i) {
    double mx = -1e300;
    bool any = false;
    for (int j = 0; j < A.cols; ++j) {
      if (allow && !(*allow)[static_cast<std::size_t>(i) * A.cols + j]) continue;
      mx = std::max(mx, A.at(i, j));
      any = true;
    }
    if (!any) continue;  // fully masked row stays exactly zero
    double z = 0.0;
    for (int j = 0; j < A.cols; ++j) {
      if (allow && !(*allow)[static_cast<std::size_t>(i) * A.cols + j]) continue;
      double e = std::exp(A.at(i, j) - mx);
      P.at(i, j) = e;
      z += e;
    }
    for (int j = 0; j < A.cols; ++j) P.at(i, j) /= z;
  }
  Value v = push(std::move(P), nullptr);
  int self = v.idx, ai = a.idx;
  nodes_[self].back = [self, ai](Tape& t) {
    const Matrix& P = t.nodes_[self].value;
    const Matrix& dP = t.nodes_[self].grad;
    Matrix& dA = t.grad_mut(ai);
    for (int i = 0; i < P.rows; ++i) {
      double dot = 0.0;
      for (int j = 0; j < P.cols; ++j) dot += P.at(i, j) * dP.at(i, j);
      for (int j = 0; j < P.cols; ++j) {
        double p = P.at(i, j);
        if (p != 0.0) dA.at(i, j) += p * (dP.at(i, j) - dot);
      }
    }
  };
  return v;
}

Value Tape::gather_rows(Value table, std::vector<int> ids) {
  const Matrix& T = value(table);
  Matrix C(static_cast<int>(ids.size()), T.cols);
  for (int i = 0; i < C.rows; ++i) {
    assert(ids[i] >= 0 && ids[i] < T.rows);
    for (int j = 0; j < T.cols; ++j) C.at(i, j) = T.at(ids[i], j);
  }
  Value v = push(std::move(C), nullptr);
  int self = v.idx, ti = table.idx;
  nodes_[self].back = [self, ti, ids](Tape& t) {
    const Matrix& dC = t.nodes_[self].grad;
    Matrix& dT = t.grad_mut(ti);
    for (int i = 0; i < dC.rows; ++i) {
      for (int j = 0; j < dC.cols; ++j) dT.at(ids[i], j) += dC.at(i, j);
    }
  };
  return v;
}

Value Tape::concat_rows(Value a, Value b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  assert(A.cols == B.cols);
  Matrix C(A.rows + B.rows, A.cols);
  std::copy(A.data.begin(), A.data.end(), C.data.begin());
  std::copy(B.data.begin(), B.data.end(), C.data.begin() + static_cast<std::ptrdiff_t>(A.data.size()));
  Value v = push(std::move(C), nullptr);
  int self = v.idx, ai = a.idx, bi = b.idx, arows = A.rows;
  nodes_[self].back = [self, ai, bi, arows](Tape& t) {
    const Matrix& dC = t.nodes_[self].grad;
    Matrix& dA = t.grad_mut(ai);
    Matrix& dB = t.grad_mut(bi);
    std::size_t split = static_cast<std::size_t>(arows) * dC.cols;
    for (std::size_t i = 0; i < split; ++i) dA.data[i] += dC.data[i];
    for (std::size_t i = split; i < dC.data.size(); ++i) dB.data[i - split] += dC.data[i];
  };
  return v;
}

Value Tape::slice_rows(Value a, int r0, int r1) {
  const Matrix& A = value(a);
  assert(0 <= r0 && r0 < r1 && r1 <= A.rows);
  Matrix C(r1 - r0, A.cols);
  std::copy(A.data.begin() + static_cast<std::ptrdiff_t>(r0) * A.cols,
            A.data.begin() + static_cast<std::ptrdiff_t>(r1) * A.cols, C.data.begin());
  Value v = push(std::move(C), nullptr);
  int self = v.idx, ai = a.idx;
  nodes_[self].back = [self, ai, r0](Tape& t) {
    const Matrix& dC = t.nodes_[self].grad;
    Matrix& dA = t.grad_mut(ai);
    for (int i = 0; i < dC.rows; ++i) {
      for (int j = 0; j < dC.cols; ++j) dA.at(r0 + i, j) += dC.at(i, j);
    }
  };
  return v;
}

Value Tape::concat_cols(const std::vector<Value>& parts) {
  assert(!parts.empty());
  int rows = value(parts[0]).rows;
  int cols = 0;
  for (Value p : parts) {
    assert(value(p).rows == rows);
    cols += value(p).cols;
  }
  Matrix C(rows, cols);
  int off = 0;
  std::vector<int> idxs;
  std::vector<int> widths;
  for (Value p : parts) {
    const Matrix& P = value(p);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < P.cols; ++j) C.at(i, off + j) = P.at(i, j);
    }
    idxs.push_back(p.idx);
    widths.push_back(P.cols);
    off += P.cols;
  }
  Value v = push(std::move(C), nullptr);
  int self = v.idx;
  nodes_[self].back = [self, idxs, widths](Tape& t) {
    const Matrix& dC = t.nodes_[self].grad;
    int off = 0;
    for (std::size_t k = 0; k < idxs.size(); ++k) {
      Matrix& dP = t.grad_mut(idxs[k]);
      for (int i = 0; i < dC.rows; ++i) {
        for (int j = 0; j < widths[k]; ++j) dP.at(i, j) += dC.at(i, off + j);
      }
      off += widths[k];
    }
  };
  return v;
}

Value Tape::slice_cols(Value a, int c0, int c1) {
  const Matrix& A = value(a);
  assert(0 <= c0 && c0 < c1 && c1 <= A.cols);
  Matrix C(A.rows, c1 - c0);
  for (int i = 0; i < A.rows; ++i) {
    for (int j = c0; j < c1; ++j) C.at(i, j - c0) = A.at(i, j);
  }
  Value v = push(std::move(C), nullptr);
  int self = v.idx, ai = a.idx;
  nodes_[self].back = [self, ai, c0](Tape& t) {
    const Matrix& dC = t.nodes_[self].grad;
    Matrix& dA = t.grad_mut(ai);
    for (int i = 0; i < dC.rows; ++i) {
      for (int j = 0; j < dC.cols; ++j) dA.at(i, c0 + j) += dC.at(i, j);
    }
  };
  return v;
}

Value Tape::cross_entropy(Value logits, std::vector<Supervision> sup, Reduction red) {
  const Matrix& L = value(logits);
  double denom = 1.0;
  if (red == Reduction::Mean) {
    denom = 0.0;
    for (const auto& s : sup) denom += s.weight;
    if (denom == 0.0) denom = 1.0;
  }
  double loss = 0.0;
  for (const auto& s : sup) {
    assert(s.row >= 0 && s.row < L.rows && s.target >= 0 && s.target < L.cols);
    double mx = -1e300;
    for (int j = 0; j < L.cols; ++j) mx = std::max(mx, L.at(s.row, j));
    double z = 0.0;
    for (int j = 0; j < L.cols; ++j) z += std::exp(L.at(s.row, j) - mx);
    loss += s.weight * (std::log(z) - (L.at(s.row, s.target) - mx));
  }
  Matrix C(1, 1);
  C.at(0, 0) = loss / denom;
  Value v = push(std::move(C), nullptr);
  int self = v.idx, li = logits.idx;
  nodes_[self].back = [self, li, sup, denom](Tape& t) {
    const Matrix& L = t.nodes_[li].value;
    double g = t.nodes_[self].grad.at(0, 0);
    Matrix& dL = t.grad_mut(li);
    for (const auto& s : sup) {
      double mx = -1e300;
      for (int j = 0; j < L.cols; ++j) mx = std::max(mx, L.at(s.row, j));
      double z = 0.0;
      for (int j = 0; j < L.cols; ++j) z += std::exp(L.at(s.row, j) - mx);
      double scale = g * s.weight / denom;
      for (int j = 0; j < L.cols; ++j) {
        dL.at(s.row, j) += scale * (std::exp(L.at(s.row, j) - mx) / z);
      }
      dL.at(s.row, s.target) -= scale;
    }
  };
  return v;
}

void Tape::backward(Value loss) {
  assert(value(loss).rows == 1 && value(loss).cols == 1);
  grad_mut(loss.idx).at(0, 0) = 1.0;
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    if (nodes_[i].back) nodes_[i].back(*this);
  }
}

}  // namespace worldkit::nn
