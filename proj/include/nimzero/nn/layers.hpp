#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "nimzero/nn/mat.hpp"

namespace nimzero::nn {

struct DegenerateBatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Weights start uniform in +-1/sqrt(fan_in); biases start at zero. The LSTM
// forget gate gets +1 on top (see Lstm::init).
template <class T>
void init_uniform(Mat<T>& w, int fan_in, std::mt19937_64& rng) {
  const T bound = T(1) / std::sqrt(static_cast<T>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (T& x : w.v) x = static_cast<T>(dist(rng));
}

template <class T>
struct Linear {
  Param<T> weight;  // [out x in]
  Param<T> bias;    // [out x 1]

  Linear() = default;
  Linear(std::string name, int in, int out)
      : weight(name + ".weight", out, in), bias(name + ".bias", out, 1) {}

  void init(std::mt19937_64& rng) { init_uniform(weight.w, weight.w.cols, rng); bias.w.zero(); }

  int in_features() const { return weight.w.cols; }
  int out_features() const { return weight.w.rows; }

  Mat<T> forward(const Mat<T>& x) const {
    require_shape(x, in_features(), x.cols, "linear input");
    Mat<T> y(out_features(), x.cols);
    matmul(y, weight.w, x);
    add_column_broadcast(y, bias.w);
    return y;
  }

  // Accumulates parameter gradients, returns gradient wrt the input.
  Mat<T> backward(const Mat<T>& x, const Mat<T>& dy) {
    Mat<T> dx(in_features(), x.cols);
    matmul_abt(weight.g, dy, x);
    add_rowsum(bias.g, dy);
    matmul_atb(dx, weight.w, dy);
    return dx;
  }

  std::vector<Param<T>*> parameters() { return {&weight, &bias}; }
};

template <class T>
Mat<T> sigmoid(const Mat<T>& x) {
  Mat<T> y(x.rows, x.cols);
  for (size_t i = 0; i < x.v.size(); ++i) y.v[i] = T(1) / (T(1) + std::exp(-x.v[i]));
  return y;
}

template <class T>
Mat<T> sigmoid_backward(const Mat<T>& y, const Mat<T>& dy) {
  Mat<T> dx(y.rows, y.cols);
  for (size_t i = 0; i < y.v.size(); ++i) dx.v[i] = dy.v[i] * y.v[i] * (T(1) - y.v[i]);
  return dx;
}

template <class T>
Mat<T> tanh_forward(const Mat<T>& x) {
  Mat<T> y(x.rows, x.cols);
  for (size_t i = 0; i < x.v.size(); ++i) y.v[i] = std::tanh(x.v[i]);
  return y;
}

template <class T>
Mat<T> tanh_backward(const Mat<T>& y, const Mat<T>& dy) {
  Mat<T> dx(y.rows, y.cols);
  for (size_t i = 0; i < y.v.size(); ++i) dx.v[i] = dy.v[i] * (T(1) - y.v[i] * y.v[i]);
  return dx;
}

template <class T>
Mat<T> relu(const Mat<T>& x) {
  Mat<T> y(x.rows, x.cols);
  for (size_t i = 0; i < x.v.size(); ++i) y.v[i] = x.v[i] > T(0) ? x.v[i] : T(0);
  return y;
}

template <class T>
Mat<T> relu_backward(const Mat<T>& x, const Mat<T>& dy) {
  Mat<T> dx(x.rows, x.cols);
  for (size_t i = 0; i < x.v.size(); ++i) dx.v[i] = x.v[i] > T(0) ? dy.v[i] : T(0);
  return dx;
}

// Column-wise softmax over the rows (one distribution per batch entry).
template <class T>
Mat<T> softmax(const Mat<T>& logits) {
  Mat<T> y(logits.rows, logits.cols);
  for (int j = 0; j < logits.cols; ++j) {
    T max = logits.at(0, j);
    for (int i = 1; i < logits.rows; ++i) max = std::max(max, logits.at(i, j));
    T sum = 0;
    for (int i = 0; i < logits.rows; ++i) {
      const T e = std::exp(logits.at(i, j) - max);
      y.at(i, j) = e;
      sum += e;
    }
    for (int i = 0; i < logits.rows; ++i) y.at(i, j) /= sum;
  }
  return y;
}

template <class T>
Mat<T> softmax_backward(const Mat<T>& y, const Mat<T>& dy) {
  Mat<T> dx(y.rows, y.cols);
  for (int j = 0; j < y.cols; ++j) {
    T dot = 0;
    for (int i = 0; i < y.rows; ++i) dot += dy.at(i, j) * y.at(i, j);
    for (int i = 0; i < y.rows; ++i) dx.at(i, j) = y.at(i, j) * (dy.at(i, j) - dot);
  }
  return dx;
}

// Single LSTM layer with gate order input, forget, cell, output. Parameter
// count is 4*(hidden*(in+hidden) + hidden).
template <class T>
struct Lstm {
  int in = 0;
  int hidden = 0;
  Param<T> w_ih;  // [4H x in]
  Param<T> w_hh;  // [4H x H]
  Param<T> bias;  // [4H x 1]

  Lstm() = default;
  Lstm(std::string name, int in_size, int hidden_size)
      : in(in_size),
        hidden(hidden_size),
        w_ih(name + ".w_ih", 4 * hidden_size, in_size),
        w_hh(name + ".w_hh", 4 * hidden_size, hidden_size),
        bias(name + ".bias", 4 * hidden_size, 1) {}

  void init(std::mt19937_64& rng) {
    init_uniform(w_ih.w, in, rng);
    init_uniform(w_hh.w, hidden, rng);
    bias.w.zero();
    for (int i = hidden; i < 2 * hidden; ++i) bias.w.v[i] = T(1);  // forget gate
  }

  struct Cache {
    // Activated gates [4H x B], cell state and its tanh [H x B], per step.
    std::vector<Mat<T>> gates, cell, tanh_cell, hidden_state;
    int batch = -1;
    bool filled() const { return !gates.empty(); }
    void clear() {
      gates.clear();
      cell.clear();
      tanh_cell.clear();
      hidden_state.clear();
      batch = -1;
    }
  };

  // xs: one [in x B] matrix per token. Fills the cache for backward and
  // returns the full hidden sequence (cache.hidden_state).
  const std::vector<Mat<T>>& forward(const std::vector<Mat<T>>& xs, Cache& cache) const {
    if (xs.empty()) throw ShapeMismatch("lstm forward needs a non-empty sequence");
    const int B = xs[0].cols;
    cache.clear();
    cache.batch = B;
    Mat<T> h(hidden, B), c(hidden, B);
    for (const Mat<T>& x : xs) {
      require_shape(x, in, B, "lstm input token");
      Mat<T> pre(4 * hidden, B);
      matmul(pre, w_ih.w, x);
      matmul(pre, w_hh.w, h);
      add_column_broadcast(pre, bias.w);
      activate_gates(pre);
      step_state(pre, c, h);
      cache.gates.push_back(std::move(pre));
      cache.cell.push_back(c);
      Mat<T> tc(hidden, B);
      for (size_t i = 0; i < tc.v.size(); ++i) tc.v[i] = std::tanh(c.v[i]);
      for (size_t i = 0; i < h.v.size(); ++i)
        h.v[i] = cache.gates.back().v[3 * hidden * B + i] * tc.v[i];
      cache.tanh_cell.push_back(std::move(tc));
      cache.hidden_state.push_back(h);
    }
    return cache.hidden_state;
  }

  // dhs holds the loss gradient wrt each step's hidden output (commonly zero
  // except the last step). Accumulates parameter gradients and returns the
  // gradient wrt each input token.
  std::vector<Mat<T>> backward(const std::vector<Mat<T>>& xs, const Cache& cache,
                               const std::vector<Mat<T>>& dhs) {
    if (!cache.filled()) throw MissingCache("lstm backward called before forward");
    const int steps = static_cast<int>(xs.size());
    if (static_cast<int>(cache.gates.size()) != steps ||
        static_cast<int>(dhs.size()) != steps)
      throw ShapeMismatch("lstm backward: cache/grad sequence length mismatch");
    const int B = cache.batch;
    const int H = hidden;

    std::vector<Mat<T>> dxs(steps);
    Mat<T> dh(H, B), dc(H, B), da(4 * H, B);
    for (int t = steps - 1; t >= 0; --t) {
      for (size_t i = 0; i < dh.v.size(); ++i) dh.v[i] += dhs[t].v[i];
      const Mat<T>& gates = cache.gates[t];
      const Mat<T>& tc = cache.tanh_cell[t];
      const T* gi = gates.v.data();
      const T* gf = gates.v.data() + static_cast<size_t>(H) * B;
      const T* gg = gates.v.data() + 2 * static_cast<size_t>(H) * B;
      const T* go = gates.v.data() + 3 * static_cast<size_t>(H) * B;
      T* dai = da.v.data();
      T* daf = da.v.data() + static_cast<size_t>(H) * B;
      T* dag = da.v.data() + 2 * static_cast<size_t>(H) * B;
      T* dao = da.v.data() + 3 * static_cast<size_t>(H) * B;
      const size_t nb = static_cast<size_t>(H) * B;
      for (size_t i = 0; i < nb; ++i) {
        const T dout = dh.v[i];
        const T dcell = dc.v[i] + dout * go[i] * (T(1) - tc.v[i] * tc.v[i]);
        const T cprev = t > 0 ? cache.cell[t - 1].v[i] : T(0);
        dai[i] = dcell * gg[i] * gi[i] * (T(1) - gi[i]);
        daf[i] = dcell * cprev * gf[i] * (T(1) - gf[i]);
        dag[i] = dcell * gi[i] * (T(1) - gg[i] * gg[i]);
        dao[i] = dout * tc.v[i] * go[i] * (T(1) - go[i]);
        dc.v[i] = dcell * gf[i];
      }
      matmul_abt(w_ih.g, da, xs[t]);
      if (t > 0) matmul_abt(w_hh.g, da, cache.hidden_state[t - 1]);
      add_rowsum(bias.g, da);

      dxs[t].resize(in, B);
      matmul_atb(dxs[t], w_ih.w, da);
      dh.zero();
      matmul_atb(dh, w_hh.w, da);
    }
    return dxs;
  }

  // Streaming inference for scalar-token sequences (in == 1). h and c are
  // caller-owned state buffers, zeroed via reset_state.
  void reset_state(Mat<T>& h, Mat<T>& c) const {
    h.resize(hidden, 1);
    c.resize(hidden, 1);
  }

  void step_infer(T x, Mat<T>& h, Mat<T>& c, Mat<T>& scratch) const {
    scratch.resize(4 * hidden, 1);
    for (int i = 0; i < 4 * hidden; ++i)
      scratch.v[i] = w_ih.w.v[i] * x + bias.w.v[i];
    matmul(scratch, w_hh.w, h);
    activate_gates(scratch);
    const T* gi = scratch.v.data();
    const T* gf = scratch.v.data() + hidden;
    const T* gg = scratch.v.data() + 2 * hidden;
    const T* go = scratch.v.data() + 3 * hidden;
    for (int i = 0; i < hidden; ++i) {
      c.v[i] = gf[i] * c.v[i] + gi[i] * gg[i];
      h.v[i] = go[i] * std::tanh(c.v[i]);
    }
  }

  std::vector<Param<T>*> parameters() { return {&w_ih, &w_hh, &bias}; }

 private:
  void activate_gates(Mat<T>& pre) const {
    const size_t nb = pre.v.size() / 4;
    for (size_t i = 0; i < nb; ++i) pre.v[i] = T(1) / (T(1) + std::exp(-pre.v[i]));
    for (size_t i = nb; i < 2 * nb; ++i) pre.v[i] = T(1) / (T(1) + std::exp(-pre.v[i]));
    for (size_t i = 2 * nb; i < 3 * nb; ++i) pre.v[i] = std::tanh(pre.v[i]);
    for (size_t i = 3 * nb; i < 4 * nb; ++i) pre.v[i] = T(1) / (T(1) + std::exp(-pre.v[i]));
  }

  void step_state(const Mat<T>& gates, Mat<T>& c, Mat<T>&) const {
    const size_t nb = c.v.size();
    const T* gi = gates.v.data();
    const T* gf = gates.v.data() + nb;
    const T* gg = gates.v.data() + 2 * nb;
    for (size_t i = 0; i < nb; ++i) c.v[i] = gf[i] * c.v[i] + gi[i] * gg[i];
  }
};

// Batch normalization over the batch dimension of an [F x B] activation.
template <class T>
struct BatchNorm {
  static constexpr T kEps = T(1e-5);

  Param<T> scale;  // gamma [F x 1]
  Param<T> shift;  // beta  [F x 1]
  Mat<T> running_mean, running_var;
  T momentum = T(0.1);
  bool training = true;

  BatchNorm() = default;
  BatchNorm(std::string name, int features)
      : scale(name + ".scale", features, 1),
        shift(name + ".shift", features, 1),
        running_mean(features, 1),
        running_var(features, 1) {
    for (T& x : scale.w.v) x = T(1);
    for (T& x : running_var.v) x = T(1);
  }

  int features() const { return scale.w.rows; }

  struct Cache {
    Mat<T> normalized;  // x_hat
    Mat<T> inv_std;     // [F x 1]
    bool filled() const { return normalized.rows > 0; }
  };

  Mat<T> forward(const Mat<T>& x, Cache& cache) {
    require_shape(x, features(), x.cols, "batchnorm input");
    const int F = features(), B = x.cols;
    if (training && B < 2) throw DegenerateBatch("batchnorm needs batch >= 2 in train mode");
    Mat<T> y(F, B);
    cache.normalized.resize(F, B);
    cache.inv_std.resize(F, 1);
    for (int i = 0; i < F; ++i) {
      const T* xi = x.row(i);
      T mean, var;
      if (training) {
        T sum = 0;
        for (int j = 0; j < B; ++j) sum += xi[j];
        mean = sum / B;
        T sq = 0;
        for (int j = 0; j < B; ++j) sq += (xi[j] - mean) * (xi[j] - mean);
        var = sq / B;
        running_mean.v[i] = (T(1) - momentum) * running_mean.v[i] + momentum * mean;
        const T unbiased = B > 1 ? sq / (B - 1) : var;
        running_var.v[i] = (T(1) - momentum) * running_var.v[i] + momentum * unbiased;
      } else {
        mean = running_mean.v[i];
        var = running_var.v[i];
      }
      const T inv_std = T(1) / std::sqrt(var + kEps);
      cache.inv_std.v[i] = inv_std;
      for (int j = 0; j < B; ++j) {
        const T xhat = (xi[j] - mean) * inv_std;
        cache.normalized.at(i, j) = xhat;
        y.at(i, j) = scale.w.v[i] * xhat + shift.w.v[i];
      }
    }
    return y;
  }

  Mat<T> backward(const Mat<T>& dy, const Cache& cache) {
    if (!cache.filled()) throw MissingCache("batchnorm backward called before forward");
    const int F = features(), B = dy.cols;
    Mat<T> dx(F, B);
    for (int i = 0; i < F; ++i) {
      const T* dyi = dy.row(i);
      const T* xhat = cache.normalized.row(i);
      T sum_dy = 0, sum_dy_xhat = 0;
      for (int j = 0; j < B; ++j) {
        sum_dy += dyi[j];
        sum_dy_xhat += dyi[j] * xhat[j];
      }
      scale.g.v[i] += sum_dy_xhat;
      shift.g.v[i] += sum_dy;
      if (training) {
        const T k = scale.w.v[i] * cache.inv_std.v[i] / B;
        for (int j = 0; j < B; ++j)
          dx.at(i, j) = k * (B * dyi[j] - sum_dy - xhat[j] * sum_dy_xhat);
      } else {
        const T k = scale.w.v[i] * cache.inv_std.v[i];
        for (int j = 0; j < B; ++j) dx.at(i, j) = k * dyi[j];
      }
    }
    return dx;
  }

  std::vector<Param<T>*> parameters() { return {&scale, &shift}; }
};

}  // namespace nimzero::nn
