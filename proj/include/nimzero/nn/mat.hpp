#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace nimzero::nn {

struct ShapeMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MissingCache : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense row-major matrix. Vectors are [n x 1] columns.
template <class T>
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<T> v;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, T(0)) {}

  T* row(int r) { return v.data() + static_cast<size_t>(r) * cols; }
  const T* row(int r) const { return v.data() + static_cast<size_t>(r) * cols; }
  T& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  const T& at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }

  size_t size() const { return v.size(); }
  void zero() { std::fill(v.begin(), v.end(), T(0)); }
  void resize(int r, int c) {
    rows = r;
    cols = c;
    v.assign(static_cast<size_t>(r) * c, T(0));
  }
  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

template <class T>
void require_shape(const Mat<T>& m, int rows, int cols, const char* what) {
  if (m.rows != rows || m.cols != cols)
    throw ShapeMismatch(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                        std::to_string(cols) + ", got " + std::to_string(m.rows) + "x" +
                        std::to_string(m.cols));
}

// C += A * B. The B.cols == 1 case is the tree-search hot path; the lane
// accumulators keep the reduction vectorizable without reassociation flags.
template <class T>
void matmul(Mat<T>& C, const Mat<T>& A, const Mat<T>& B) {
  assert(A.cols == B.rows && C.rows == A.rows && C.cols == B.cols);
  const int m = A.rows, k = A.cols, n = B.cols;
  if (n == 1) {
    constexpr int L = 16;
    for (int i = 0; i < m; ++i) {
      const T* a = A.row(i);
      const T* x = B.v.data();
      T lane[L] = {};
      int p = 0;
      for (; p + L <= k; p += L)
        for (int u = 0; u < L; ++u) lane[u] += a[p + u] * x[p + u];
      T s = 0;
      for (int u = 0; u < L; ++u) s += lane[u];
      for (; p < k; ++p) s += a[p] * x[p];
      C.v[i] += s;
    }
    return;
  }
  for (int i = 0; i < m; ++i) {
    T* c = C.row(i);
    const T* a = A.row(i);
    for (int p = 0; p < k; ++p) {
      const T s = a[p];
      const T* b = B.row(p);
      for (int j = 0; j < n; ++j) c[j] += s * b[j];
    }
  }
}

// C += A * B^T, i.e. C[i][j] += sum_p A[i][p] * B[j][p].
template <class T>
void matmul_abt(Mat<T>& C, const Mat<T>& A, const Mat<T>& B) {
  assert(A.cols == B.cols && C.rows == A.rows && C.cols == B.rows);
  const int m = A.rows, k = A.cols, n = B.rows;
  constexpr int L = 16;
  for (int i = 0; i < m; ++i) {
    const T* a = A.row(i);
    T* c = C.row(i);
    for (int j = 0; j < n; ++j) {
      const T* b = B.row(j);
      T lane[L] = {};
      int p = 0;
      for (; p + L <= k; p += L)
        for (int u = 0; u < L; ++u) lane[u] += a[p + u] * b[p + u];
      T s = 0;
      for (int u = 0; u < L; ++u) s += lane[u];
      for (; p < k; ++p) s += a[p] * b[p];
      c[j] += s;
    }
  }
}

// C += A^T * B, i.e. C[i][j] += sum_p A[p][i] * B[p][j].
template <class T>
void matmul_atb(Mat<T>& C, const Mat<T>& A, const Mat<T>& B) {
  assert(A.rows == B.rows && C.rows == A.cols && C.cols == B.cols);
  const int k = A.rows, m = A.cols, n = B.cols;
  for (int p = 0; p < k; ++p) {
    const T* a = A.row(p);
    const T* b = B.row(p);
    for (int i = 0; i < m; ++i) {
      const T s = a[i];
      if (s == T(0)) continue;
      T* c = C.row(i);
      for (int j = 0; j < n; ++j) c[j] += s * b[j];
    }
  }
}

template <class T>
void add_column_broadcast(Mat<T>& X, const Mat<T>& bias) {
  assert(bias.rows == X.rows && bias.cols == 1);
  for (int i = 0; i < X.rows; ++i) {
    T* x = X.row(i);
    const T b = bias.v[i];
    for (int j = 0; j < X.cols; ++j) x[j] += b;
  }
}

template <class T>
void add_rowsum(Mat<T>& bias, const Mat<T>& X) {
  assert(bias.rows == X.rows && bias.cols == 1);
  for (int i = 0; i < X.rows; ++i) {
    const T* x = X.row(i);
    T s = 0;
    for (int j = 0; j < X.cols; ++j) s += x[j];
    bias.v[i] += s;
  }
}

template <class T>
bool all_finite(const Mat<T>& m) {
  for (T x : m.v)
    if (!std::isfinite(x)) return false;
  return true;
}

// A trainable tensor: values plus a same-shape gradient accumulator.
template <class T>
struct Param {
  std::string name;
  Mat<T> w;
  Mat<T> g;

  Param() = default;
  Param(std::string n, int rows, int cols) : name(std::move(n)), w(rows, cols), g(rows, cols) {}

  void zero_grad() { g.zero(); }
  size_t size() const { return w.size(); }
};

template <class T>
void zero_grads(const std::vector<Param<T>*>& params) {
  for (auto* p : params) p->zero_grad();
}

template <class T>
size_t parameter_count(const std::vector<Param<T>*>& params) {
  size_t total = 0;
  for (auto* p : params) total += p->size();
  return total;
}

}  // namespace nimzero::nn
