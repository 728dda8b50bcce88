#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "linknbed/common.hpp"
#include "linknbed/tensor.hpp"

namespace linknbed {

template <typename Real>
struct AdamHyper {
  Real beta1 = Real(0.9);
  Real beta2 = Real(0.999);
  Real epsilon = Real(1e-8);
};

// Adam over a fixed list of parameter arrays, driven row by row so only rows
// that actually received gradient this step pay any cost. The step counter
// advances once per begin_step; rows never touched keep zero moments.
template <typename Real>
class Adam {
 public:
  Adam() = default;
  Adam(const std::vector<std::pair<int32_t, int32_t>>& shapes, AdamHyper<Real> hp = {})
      : hp_(hp) {
    m_.reserve(shapes.size());
    v_.reserve(shapes.size());
    for (auto [r, c] : shapes) {
      m_.emplace_back(r, c);
      v_.emplace_back(r, c);
    }
  }

  void begin_step(Real lr) {
    ++step_;
    lr_ = lr;
    corr1_ = 1.0 - std::pow(double(hp_.beta1), double(step_));
    corr2_ = 1.0 - std::pow(double(hp_.beta2), double(step_));
  }

  void update_row(size_t array, int32_t row, std::span<const Real> grad,
                  std::span<Real> param) {
    LNB_REQUIRE(array < m_.size(), "adam: array index out of range");
    LNB_REQUIRE(grad.size() == param.size(), "adam: grad/param shape mismatch");
    auto mrow = m_[array].row(row);
    auto vrow = v_[array].row(row);
    const double b1 = double(hp_.beta1);
    const double b2 = double(hp_.beta2);
    for (size_t j = 0; j < grad.size(); ++j) {
      const double g = double(grad[j]);
      const double m = b1 * double(mrow[j]) + (1.0 - b1) * g;
      const double v = b2 * double(vrow[j]) + (1.0 - b2) * g * g;
      mrow[j] = Real(m);
      vrow[j] = Real(v);
      const double mhat = m / corr1_;
      const double vhat = v / corr2_;
      param[j] = Real(double(param[j]) - double(lr_) * mhat / (std::sqrt(vhat) + double(hp_.epsilon)));
    }
  }

  int64_t step_count() const { return step_; }
  void set_step_count(int64_t s) { step_ = s; }
  size_t array_count() const { return m_.size(); }
  Matrix<Real>& first_moment(size_t i) { return m_[i]; }
  Matrix<Real>& second_moment(size_t i) { return v_[i]; }
  const Matrix<Real>& first_moment(size_t i) const { return m_[i]; }
  const Matrix<Real>& second_moment(size_t i) const { return v_[i]; }
  const AdamHyper<Real>& hyper() const { return hp_; }

 private:
  AdamHyper<Real> hp_;
  int64_t step_ = 0;
  Real lr_ = Real(0);
  double corr1_ = 1.0;
  double corr2_ = 1.0;
  std::vector<Matrix<Real>> m_;
  std::vector<Matrix<Real>> v_;
};

}  // namespace linknbed
