#pragma once

#include <cmath>

#include "nimzero/nn/mat.hpp"

namespace nimzero::nn {

// Probabilities are floored at 1e-12 before any log.
inline constexpr double kProbFloor = 1e-12;

// Mean over the batch of -sum target * log(predicted). `predicted` holds one
// distribution per column. Returns the loss; fills dpredicted if given.
template <class T>
T cross_entropy(const Mat<T>& predicted, const Mat<T>& target, Mat<T>* dpredicted = nullptr) {
  if (!predicted.same_shape(target)) throw ShapeMismatch("cross_entropy shapes differ");
  const int B = predicted.cols;
  if (dpredicted) dpredicted->resize(predicted.rows, B);
  T loss = 0;
  for (size_t i = 0; i < predicted.v.size(); ++i) {
    const T t = target.v[i];
    if (t == T(0)) continue;
    const T p = predicted.v[i];
    if (p > T(kProbFloor)) {
      loss -= t * std::log(p);
      if (dpredicted) dpredicted->v[i] = -t / p / B;
    } else {
      loss -= t * std::log(T(kProbFloor));
      // clamped: flat in the predicted probability
    }
  }
  return loss / B;
}

// Mean squared error between two [1 x B] (or equal-shape) mats.
template <class T>
T mse(const Mat<T>& predicted, const Mat<T>& target, Mat<T>* dpredicted = nullptr) {
  if (!predicted.same_shape(target)) throw ShapeMismatch("mse shapes differ");
  const T n = static_cast<T>(predicted.v.size());
  if (dpredicted) dpredicted->resize(predicted.rows, predicted.cols);
  T loss = 0;
  for (size_t i = 0; i < predicted.v.size(); ++i) {
    const T d = predicted.v[i] - target.v[i];
    loss += d * d;
    if (dpredicted) dpredicted->v[i] = T(2) * d / n;
  }
  return loss / n;
}

// Mean binary cross-entropy for sigmoid outputs against {0,1} targets.
template <class T>
T binary_cross_entropy(const Mat<T>& predicted, const Mat<T>& target,
                       Mat<T>* dpredicted = nullptr) {
  if (!predicted.same_shape(target)) throw ShapeMismatch("binary_cross_entropy shapes differ");
  const T n = static_cast<T>(predicted.v.size());
  if (dpredicted) dpredicted->resize(predicted.rows, predicted.cols);
  T loss = 0;
  for (size_t i = 0; i < predicted.v.size(); ++i) {
    const T y = target.v[i];
    const T p = predicted.v[i];
    const T p1 = std::max(p, T(kProbFloor));
    const T p0 = std::max(T(1) - p, T(kProbFloor));
    loss -= y * std::log(p1) + (T(1) - y) * std::log(p0);
    if (dpredicted) {
      T d = 0;
      if (p > T(kProbFloor)) d -= y / p1;
      if (T(1) - p > T(kProbFloor)) d += (T(1) - y) / p0;
      dpredicted->v[i] = d / n;
    }
  }
  return loss / n;
}

}  // namespace nimzero::nn
