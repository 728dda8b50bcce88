#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "linknbed/common.hpp"
#include "linknbed/rng.hpp"

namespace linknbed {

// Dense row-major matrix. Embedding tables store one row per id; projection
// weights store out_dim x in_dim and are applied as y = W x.
template <typename Real>
struct Matrix {
  int32_t rows = 0;
  int32_t cols = 0;
  std::vector<Real> data;

  Matrix() = default;
  Matrix(int32_t r, int32_t c) : rows(r), cols(c), data(size_t(r) * size_t(c), Real(0)) {}

  std::span<Real> row(int32_t r) {
    LNB_REQUIRE(r >= 0 && r < rows, "matrix row out of range");
    return {data.data() + size_t(r) * cols, size_t(cols)};
  }
  std::span<const Real> row(int32_t r) const {
    LNB_REQUIRE(r >= 0 && r < rows, "matrix row out of range");
    return {data.data() + size_t(r) * cols, size_t(cols)};
  }
  Real& at(int32_t r, int32_t c) { return data[size_t(r) * cols + c]; }
  Real at(int32_t r, int32_t c) const { return data[size_t(r) * cols + c]; }
  size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
};

template <typename Real>
using Vec = std::vector<Real>;

template <typename Real>
void fill_uniform(Matrix<Real>& m, Rng& rng, double lo, double hi) {
  for (auto& x : m.data) x = Real(rng.next_uniform(lo, hi));
}

// y = W x, accumulated in double.
template <typename Real>
Vec<Real> affine(const Matrix<Real>& w, std::span<const Real> x) {
  LNB_REQUIRE(int32_t(x.size()) == w.cols, "affine: dimension mismatch");
  Vec<Real> y(w.rows, Real(0));
  for (int32_t i = 0; i < w.rows; ++i) {
    const Real* wr = w.data.data() + size_t(i) * w.cols;
    double acc = 0.0;
    for (int32_t j = 0; j < w.cols; ++j) acc += double(wr[j]) * double(x[j]);
    y[i] = Real(acc);
  }
  return y;
}

// y += W x
template <typename Real>
void affine_add(Vec<Real>& y, const Matrix<Real>& w, std::span<const Real> x) {
  LNB_REQUIRE(int32_t(x.size()) == w.cols, "affine_add: dimension mismatch");
  LNB_REQUIRE(int32_t(y.size()) == w.rows, "affine_add: output mismatch");
  for (int32_t i = 0; i < w.rows; ++i) {
    const Real* wr = w.data.data() + size_t(i) * w.cols;
    double acc = 0.0;
    for (int32_t j = 0; j < w.cols; ++j) acc += double(wr[j]) * double(x[j]);
    y[i] = Real(double(y[i]) + acc);
  }
}

// g_in = W^T g_out (backward through y = W x).
template <typename Real>
Vec<Real> affine_backward_input(const Matrix<Real>& w, std::span<const Real> g_out) {
  LNB_REQUIRE(int32_t(g_out.size()) == w.rows, "affine_backward: dimension mismatch");
  Vec<Real> g_in(w.cols, Real(0));
  for (int32_t i = 0; i < w.rows; ++i) {
    const Real* wr = w.data.data() + size_t(i) * w.cols;
    const double g = double(g_out[i]);
    if (g == 0.0) continue;
    for (int32_t j = 0; j < w.cols; ++j) g_in[j] = Real(double(g_in[j]) + g * double(wr[j]));
  }
  return g_in;
}

template <typename Real>
double dot(std::span<const Real> a, std::span<const Real> b) {
  LNB_REQUIRE(a.size() == b.size(), "dot: dimension mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += double(a[i]) * double(b[i]);
  return acc;
}

template <typename Real>
Vec<Real> hadamard(std::span<const Real> a, std::span<const Real> b) {
  LNB_REQUIRE(a.size() == b.size(), "hadamard: dimension mismatch");
  Vec<Real> out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

enum class Activation { Identity, Relu, Tanh, Sigmoid };

template <typename Real>
Real activate(Activation f, Real x) {
  switch (f) {
    case Activation::Identity: return x;
    case Activation::Relu: return x > Real(0) ? x : Real(0);
    case Activation::Tanh: return Real(std::tanh(double(x)));
    case Activation::Sigmoid: return Real(1.0 / (1.0 + std::exp(-double(x))));
  }
  return x;
}

// Derivative as a function of the pre-activation. relu'(0) = 0 by the
// subgradient convention used throughout.
template <typename Real>
Real activate_grad(Activation f, Real pre) {
  switch (f) {
    case Activation::Identity: return Real(1);
    case Activation::Relu: return pre > Real(0) ? Real(1) : Real(0);
    case Activation::Tanh: {
      double t = std::tanh(double(pre));
      return Real(1.0 - t * t);
    }
    case Activation::Sigmoid: {
      double s = 1.0 / (1.0 + std::exp(-double(pre)));
      return Real(s * (1.0 - s));
    }
  }
  return Real(1);
}

template <typename Real>
Vec<Real> activate_vec(Activation f, std::span<const Real> x) {
  Vec<Real> y(x.size());
  for (size_t i = 0; i < x.size(); ++i) y[i] = activate(f, x[i]);
  return y;
}

// Max-subtracted softmax; safe for widely spread inputs.
template <typename Real>
Vec<Real> softmax(std::span<const Real> theta) {
  LNB_REQUIRE(!theta.empty(), "softmax: empty input");
  double mx = double(theta[0]);
  for (Real t : theta) mx = std::max(mx, double(t));
  Vec<Real> out(theta.size());
  double z = 0.0;
  for (size_t i = 0; i < theta.size(); ++i) {
    double e = std::exp(double(theta[i]) - mx);
    out[i] = Real(e);
    z += e;
  }
  for (auto& o : out) o = Real(double(o) / z);
  return out;
}

template <typename Real>
bool all_finite(std::span<const Real> xs) {
  for (Real x : xs) {
    if (!std::isfinite(double(x))) return false;
  }
  return true;
}

}  // namespace linknbed
