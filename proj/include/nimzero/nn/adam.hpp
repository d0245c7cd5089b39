#pragma once

#include <cmath>
#include <vector>

#include "nimzero/nn/mat.hpp"

namespace nimzero::nn {

struct NonFiniteParameter : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bias-corrected Adam on a fixed parameter list. Moments are allocated on the
// first step and must keep their shapes afterwards.
template <class T>
struct Adam {
  T lr = T(1e-3);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
  T clip_norm = T(0);  // 0 disables gradient clipping
  long long t = 0;

  explicit Adam(T learning_rate = T(1e-3)) : lr(learning_rate) {}

  void step(const std::vector<Param<T>*>& params) {
    if (m_.empty()) {
      for (auto* p : params) {
        m_.emplace_back(p->w.rows, p->w.cols);
        v_.emplace_back(p->w.rows, p->w.cols);
      }
    }
    if (m_.size() != params.size()) throw ShapeMismatch("adam: parameter list changed");
    if (clip_norm > T(0)) clip_gradients(params);
    ++t;
    const T bc1 = T(1) - std::pow(beta1, static_cast<T>(t));
    const T bc2 = T(1) - std::pow(beta2, static_cast<T>(t));
    for (size_t k = 0; k < params.size(); ++k) {
      Param<T>& p = *params[k];
      if (!p.w.same_shape(m_[k])) throw ShapeMismatch("adam: shape changed for " + p.name);
      for (size_t i = 0; i < p.w.v.size(); ++i) {
        const T g = p.g.v[i];
        m_[k].v[i] = beta1 * m_[k].v[i] + (T(1) - beta1) * g;
        v_[k].v[i] = beta2 * v_[k].v[i] + (T(1) - beta2) * g * g;
        const T mhat = m_[k].v[i] / bc1;
        const T vhat = v_[k].v[i] / bc2;
        p.w.v[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
      if (!all_finite(p.w))
        throw NonFiniteParameter("non-finite value in " + p.name + " after update " +
                                 std::to_string(t));
    }
  }

 private:
  void clip_gradients(const std::vector<Param<T>*>& params) {
    T sq = 0;
    for (auto* p : params)
      for (T g : p->g.v) sq += g * g;
    const T norm = std::sqrt(sq);
    if (norm <= clip_norm) return;
    const T scale = clip_norm / norm;
    for (auto* p : params)
      for (T& g : p->g.v) g *= scale;
  }

  std::vector<Mat<T>> m_, v_;
};

}  // namespace nimzero::nn
