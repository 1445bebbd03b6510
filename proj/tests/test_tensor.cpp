// Copyright (c) 2026 The worldkit authors
// SPDX-License-Identifier: Apache-2.0

#include "worldkit/tensor.hpp"

#include <cmath>
#include <functional>

#include "doctest.h"

using namespace worldkit::nn;

namespace {

Matrix random_matrix(Rng& rng, int r, int c, double scale = 1.0) {
  Matrix m(r, c);
  for (double& v : m.data) v = rng.normal(0.0, scale);
  return m;
}

// Central-difference check of d(sum of outputs)/d(param) for a graph builder.
// builder must read params and return a scalar loss value.
double max_rel_err(std::vector<Param*> params, const std::function<double()>& loss_fn,
                   const std::function<void()>& backward_fn, int coords, Rng& rng) {
  for (Param* p : params) p->zero_grad();
  backward_fn();
  double worst = 0.0;
  for (int c = 0; c < coords; ++c) {
    Param* p = params[rng.uniform_int(static_cast<int>(params.size()))];
    int i = rng.uniform_int(static_cast<int>(p->value.size()));
    double saved = p->value.data[i];
    double h = 1e-6 * std::max(1.0, std::abs(saved));
    p->value.data[i] = saved + h;
    double lp = loss_fn();
    p->value.data[i] = saved - h;
    double lm = loss_fn();
    p->value.data[i] = saved;
    double fd = (lp - lm) / (2.0 * h);
    double an = p->grad.data[i];
    worst = std::max(worst, std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6}));
  }
  return worst;
}

}  // namespace

TEST_CASE("rng is deterministic per seed") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 10; ++i) {
    double x = a.uniform();
    CHECK(x == b.uniform());
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
  bool differs = false;
  Rng a2(42);
  for (int i = 0; i < 10; ++i) differs |= a2.uniform() != c.uniform();
  CHECK(differs);
}

TEST_CASE("matmul forward") {
  Tape t;
  Matrix a(2, 3), b(3, 2);
  double av[] = {1, 2, 3, 4, 5, 6};
  double bv[] = {7, 8, 9, 10, 11, 12};
  std::copy(std::begin(av), std::end(av), a.data.begin());
  std::copy(std::begin(bv), std::end(bv), b.data.begin());
  auto c = t.matmul(t.input(a), t.input(b));
  CHECK(t.value(c).at(0, 0) == doctest::Approx(58));
  CHECK(t.value(c).at(0, 1) == doctest::Approx(64));
  CHECK(t.value(c).at(1, 0) == doctest::Approx(139));
  CHECK(t.value(c).at(1, 1) == doctest::Approx(154));
}

TEST_CASE("composite graph gradients match finite differences") {
  Rng rng(7);
  Param wa("wa", 4, 5), wb("wb", 5, 3), bias("bias", 1, 3), gain("gain", 1, 5), beta("beta", 1, 5);
  wa.value = random_matrix(rng, 4, 5, 0.5);
  wb.value = random_matrix(rng, 5, 3, 0.5);
  bias.value = random_matrix(rng, 1, 3, 0.5);
  gain.value = random_matrix(rng, 1, 5, 0.3);
  for (double& v : gain.value.data) v += 1.0;
  beta.value = random_matrix(rng, 1, 5, 0.3);

  std::vector<Supervision> sup = {{0, 1, 1.0}, {1, 2, 0.5}, {3, 0, 2.0}};

  auto build = [&](Tape& t) {
    auto x = t.param(wa);                       // treat as input-like param
    auto h = t.layer_norm(x, t.param(gain), t.param(beta));
    h = t.gelu(h);
    auto y = t.add_row(t.matmul(h, t.param(wb)), t.param(bias));
    return t.cross_entropy(y, sup, Reduction::Mean);
  };
  auto loss_fn = [&] {
    Tape t;
    return t.value(build(t)).at(0, 0);
  };
  auto backward_fn = [&] {
    Tape t;
    auto l = build(t);
    t.backward(l);
  };
  std::vector<Param*> params = {&wa, &wb, &bias, &gain, &beta};
  CHECK(max_rel_err(params, loss_fn, backward_fn, 60, rng) < 1e-5);
}

TEST_CASE("attention-shaped graph gradients match finite differences") {
  Rng rng(11);
  const int n = 5, d = 6, heads = 2;
  Param x("x", n, d), wq("wq", d, d), wk("wk", d, d), wv("wv", d, d), wo("wo", d, d);
  for (Param* p : {&x, &wq, &wk, &wv, &wo}) p->value = random_matrix(rng, p->value.rows, p->value.cols, 0.4);

  // block mask: rows 0-2 causal, rows 3-4 causal, no cross attention
  std::vector<std::uint8_t> allow(n * n, 0);
  auto set = [&](int p, int q) { allow[p * n + q] = 1; };
  for (int p = 0; p < 3; ++p)
    for (int q = 0; q <= p; ++q) set(p, q);
  for (int p = 3; p < n; ++p)
    for (int q = 3; q <= p; ++q) set(p, q);

  std::vector<Supervision> sup = {{0, 1, 1.0}, {2, 3, 1.0}, {4, 0, 1.0}};
  const int dh = d / heads;

  auto build = [&](Tape& t) {
    auto xv = t.param(x);
    auto q = t.matmul(xv, t.param(wq));
    auto k = t.matmul(xv, t.param(wk));
    auto v = t.matmul(xv, t.param(wv));
    std::vector<Tape::Value> outs;
    for (int h = 0; h < heads; ++h) {
      auto qh = t.slice_cols(q, h * dh, (h + 1) * dh);
      auto kh = t.slice_cols(k, h * dh, (h + 1) * dh);
      auto vh = t.slice_cols(v, h * dh, (h + 1) * dh);
      auto scores = t.scale(t.matmul_nt(qh, kh), 1.0 / std::sqrt(double(dh)));
      auto probs = t.softmax_masked(scores, &allow);
      outs.push_back(t.matmul(probs, vh));
    }
    auto merged = t.concat_cols(outs);
    auto y = t.matmul(merged, t.param(wo));
    return t.cross_entropy(y, sup, Reduction::Sum);
  };
  auto loss_fn = [&] {
    Tape t;
    return t.value(build(t)).at(0, 0);
  };
  auto backward_fn = [&] {
    Tape t;
    t.backward(build(t));
  };
  std::vector<Param*> params = {&x, &wq, &wk, &wv, &wo};
  CHECK(max_rel_err(params, loss_fn, backward_fn, 80, rng) < 1e-5);
}

TEST_CASE("gather and slice gradients match finite differences") {
  Rng rng(23);
  Param table("table", 7, 4), w("w", 4, 3);
  table.value = random_matrix(rng, 7, 4, 0.5);
  w.value = random_matrix(rng, 4, 3, 0.5);
  std::vector<int> ids = {3, 0, 3, 6, 2};
  std::vector<Supervision> sup = {{0, 0, 1.0}, {4, 2, 1.0}};

  auto build = [&](Tape& t) {
    auto rows = t.gather_rows(t.param(table), ids);
    auto top = t.slice_rows(rows, 0, 3);
    auto bottom = t.slice_rows(rows, 3, 5);
    auto cat = t.concat_rows(top, bottom);
    auto y = t.matmul(cat, t.param(w));
    return t.cross_entropy(y, sup, Reduction::Mean);
  };
  auto loss_fn = [&] {
    Tape t;
    return t.value(build(t)).at(0, 0);
  };
  auto backward_fn = [&] {
    Tape t;
    t.backward(build(t));
  };
  std::vector<Param*> params = {&table, &w};
  CHECK(max_rel_err(params, loss_fn, backward_fn, 40, rng) < 1e-5);
}

TEST_CASE("masked softmax zeroes disallowed entries exactly") {
  Tape t;
  Matrix scores(2, 3);
  scores.at(0, 0) = 5.0;
  scores.at(0, 1) = 100.0;  // masked out
  scores.at(0, 2) = 3.0;
  scores.at(1, 0) = -1.0;
  scores.at(1, 1) = 2.0;
  scores.at(1, 2) = 0.0;
  std::vector<std::uint8_t> allow = {1, 0, 1, 1, 1, 1};
  auto probs = t.softmax_masked(t.input(scores), &allow);
  CHECK(t.value(probs).at(0, 1) == 0.0);
  CHECK(t.value(probs).at(0, 0) + t.value(probs).at(0, 2) == doctest::Approx(1.0));
  double row1 = t.value(probs).at(1, 0) + t.value(probs).at(1, 1) + t.value(probs).at(1, 2);
  CHECK(row1 == doctest::Approx(1.0));
}

TEST_CASE("cross entropy analytic values") {
  // uniform logits over V classes -> loss = ln V
  const int v = 11;
  Tape t;
  Matrix logits(2, v);
  auto l = t.cross_entropy(t.input(logits), {{0, 3, 1.0}, {1, 7, 1.0}}, Reduction::Mean);
  CHECK(t.value(l).at(0, 0) == doctest::Approx(std::log(double(v))).epsilon(1e-12));

  // strongly peaked correct logits -> loss ~ 0
  Tape t2;
  Matrix peaked(1, v);
  peaked.at(0, 3) = 50.0;
  auto l2 = t2.cross_entropy(t2.input(peaked), {{0, 3, 1.0}}, Reduction::Sum);
  CHECK(t2.value(l2).at(0, 0) < 1e-12);
}

TEST_CASE("param gradients accumulate across tapes") {
  Param w("w", 1, 1);
  w.value.at(0, 0) = 2.0;
  for (int pass = 0; pass < 2; ++pass) {
    Tape t;
    auto x = t.param(w);
    auto y = t.scale(x, 3.0);
    // fake scalar loss: 3w; d/dw = 3
    t.backward(y);
  }
  CHECK(w.grad.at(0, 0) == doctest::Approx(6.0));
}
