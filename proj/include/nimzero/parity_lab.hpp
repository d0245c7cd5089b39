#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "nimzero/csv.hpp"
#include "nimzero/game.hpp"
#include "nimzero/nn/adam.hpp"
#include "nimzero/nn/layers.hpp"
#include "nimzero/nn/losses.hpp"
#include "nimzero/oracle.hpp"
#include "nimzero/rng.hpp"

namespace nimzero::parity {

// Label of a {0,1,-1} token string: how many +1 tokens, mod 2. The -1 tokens
// are noise and do not count.
inline int parity_label(const std::vector<int8_t>& tokens) {
  int ones = 0;
  for (int8_t t : tokens) ones += t == 1;
  return ones % 2;
}

struct ParitySample {
  std::vector<int8_t> tokens;
  int label = 0;
};

// k ~ Uniform{1..n} positions chosen without replacement, each set to +1 or
// -1 with equal probability, the rest zero.
inline ParitySample gen_parity_sample(int length, std::mt19937_64& rng) {
  ParitySample s;
  s.tokens.assign(length, 0);
  const int k = std::uniform_int_distribution<int>(1, length)(rng);
  std::vector<int> slots(length);
  for (int i = 0; i < length; ++i) slots[i] = i;
  for (int i = 0; i < k; ++i) {
    const int j = std::uniform_int_distribution<int>(i, length - 1)(rng);
    std::swap(slots[i], slots[j]);
    s.tokens[slots[i]] = std::uniform_int_distribution<int>(0, 1)(rng) ? 1 : -1;
  }
  s.label = parity_label(s.tokens);
  return s;
}

inline std::vector<ParitySample> gen_parity_batch(int length, int batch,
                                                  std::mt19937_64& rng) {
  std::vector<ParitySample> out;
  out.reserve(batch);
  for (int i = 0; i < batch; ++i) out.push_back(gen_parity_sample(length, rng));
  return out;
}

// A {0,1,2}-heap position encoded like any other board, with its winning-move
// class as the label. No-win positions are rejected during sampling.
struct NimsumSample {
  std::vector<int8_t> tokens;
  std::vector<int> sizes;
  int label = 0;
};

// Rejection-samples positions until each class holds its share of the batch
// (the first batch % 3 classes absorb the remainder).
inline std::vector<NimsumSample> gen_nimsum_batch(int heaps, int batch,
                                                  std::mt19937_64& rng) {
  const std::vector<int> capacities(heaps, 2);
  std::vector<int> quota(3, batch / 3);
  for (int c = 0; c < batch % 3; ++c) ++quota[c];

  std::vector<NimsumSample> out;
  out.reserve(batch);
  std::uniform_int_distribution<int> heap_size(0, 2);
  while (out.size() < static_cast<size_t>(batch)) {
    std::vector<int> sizes(heaps);
    for (int& v : sizes) v = heap_size(rng);
    const oracle::MoveClass cls = oracle::winning_move_class(sizes);
    if (cls == oracle::MoveClass::NoWin) continue;
    const int label = oracle::move_class_label(cls);
    if (quota[label] == 0) continue;
    --quota[label];
    NimsumSample s;
    s.tokens = encode_state(NimBoard::at(capacities, sizes)).tokens;
    s.sizes = std::move(sizes);
    s.label = label;
    out.push_back(std::move(s));
  }
  return out;
}

struct SupervisedConfig {
  int train_length = 20;  // bits, or heaps for the policy lab
  int eval_length_offset = 10;
  long long steps = 1000000;
  int batch = 128;
  double learning_rate = 1e-3;
  int hidden = 128;
  int layers = 1;
  int heaps = 7;
  uint64_t seed = 0;
  long long eval_every = 1000;
  size_t eval_samples = 10000;
  bool stop_on_convergence = true;  // >= 99% on 10 consecutive evaluations
  std::string out_csv;
  std::string manifest_path;
};

struct EvalPoint {
  long long step = 0;
  double train_accuracy = 0.0;
  double eval_accuracy = 0.0;
  double loss = 0.0;
};

struct TrainResult {
  std::vector<EvalPoint> curve;
  bool converged = false;
  long long steps_run = 0;
  double final_eval_accuracy = 0.0;
};

inline void write_manifest(const SupervisedConfig& cfg, const std::string& experiment) {
  if (cfg.manifest_path.empty()) return;
  std::ofstream out(cfg.manifest_path);
  out << "experiment=" << experiment << "\n"
      << "train_length=" << cfg.train_length << "\n"
      << "eval_length_offset=" << cfg.eval_length_offset << "\n"
      << "steps=" << cfg.steps << "\n"
      << "batch=" << cfg.batch << "\n"
      << "learning_rate=" << cfg.learning_rate << "\n"
      << "hidden=" << cfg.hidden << "\n"
      << "layers=" << cfg.layers << "\n"
      << "heaps=" << cfg.heaps << "\n"
      << "seed=" << cfg.seed << "\n";
}

// A stack of LSTM layers; layer i >= 1 consumes the full hidden sequence of
// layer i - 1.
template <class T>
struct LstmStack {
  std::vector<nn::Lstm<T>> layers;

  LstmStack(int count, int in, int hidden, std::mt19937_64& rng) {
    for (int i = 0; i < count; ++i) {
      layers.emplace_back("lstm" + std::to_string(i), i == 0 ? in : hidden, hidden);
      layers.back().init(rng);
    }
  }

  struct Cache {
    std::vector<typename nn::Lstm<T>::Cache> per_layer;
  };

  const std::vector<nn::Mat<T>>& forward(const std::vector<nn::Mat<T>>& xs, Cache& cache) {
    cache.per_layer.resize(layers.size());
    const std::vector<nn::Mat<T>>* seq = &xs;
    for (size_t i = 0; i < layers.size(); ++i)
      seq = &layers[i].forward(*seq, cache.per_layer[i]);
    return *seq;
  }

  void backward(const std::vector<nn::Mat<T>>& xs, const Cache& cache,
                std::vector<nn::Mat<T>> dhs) {
    for (size_t i = layers.size(); i-- > 0;) {
      const std::vector<nn::Mat<T>>& input =
          i == 0 ? xs : cache.per_layer[i - 1].hidden_state;
      dhs = layers[i].backward(input, cache.per_layer[i], dhs);
    }
  }

  std::vector<nn::Param<T>*> parameters() {
    std::vector<nn::Param<T>*> out;
    for (auto& l : layers)
      for (auto* p : l.parameters()) out.push_back(p);
    return out;
  }
};

namespace detail {

template <class Sample>
std::vector<nn::Mat<float>> tokens_to_steps(const std::vector<Sample>& samples) {
  const size_t length = samples[0].tokens.size();
  std::vector<nn::Mat<float>> xs(length, nn::Mat<float>(1, static_cast<int>(samples.size())));
  for (size_t j = 0; j < samples.size(); ++j)
    for (size_t t = 0; t < length; ++t)
      xs[t].at(0, static_cast<int>(j)) = samples[j].tokens[t];
  return xs;
}

}  // namespace detail

// The value-network experiment: one LSTM, a single output unit, a sigmoid,
// binary cross-entropy. No batch normalization. Extrapolation accuracy is
// measured on strings eval_length_offset longer than the training strings.
inline TrainResult train_parity(const SupervisedConfig& cfg) {
  write_manifest(cfg, "parity");
  std::mt19937_64 init_rng = make_rng(cfg.seed, "parity-init");
  nn::Lstm<float> lstm("lstm", 1, cfg.hidden);
  nn::Linear<float> head("head", cfg.hidden, 1);
  lstm.init(init_rng);
  head.init(init_rng);
  std::vector<nn::Param<float>*> params = lstm.parameters();
  for (auto* p : head.parameters()) params.push_back(p);
  nn::Adam<float> opt(static_cast<float>(cfg.learning_rate));

  std::mt19937_64 train_rng = make_rng(cfg.seed, "parity-train");
  const int eval_length = cfg.train_length + cfg.eval_length_offset;

  auto eval_accuracy = [&](long long eval_index) {
    std::mt19937_64 rng = make_rng(cfg.seed, "parity-eval", eval_index);
    size_t correct = 0, total = 0;
    while (total < cfg.eval_samples) {
      const int chunk =
          static_cast<int>(std::min<size_t>(cfg.batch, cfg.eval_samples - total));
      const auto samples = gen_parity_batch(eval_length, chunk, rng);
      const auto xs = detail::tokens_to_steps(samples);
      nn::Lstm<float>::Cache cache;
      const auto& hs = lstm.forward(xs, cache);
      const nn::Mat<float> prob = nn::sigmoid(head.forward(hs.back()));
      for (int j = 0; j < chunk; ++j)
        correct += (prob.at(0, j) > 0.5f) == (samples[j].label == 1);
      total += chunk;
    }
    return static_cast<double>(correct) / total;
  };

  CsvWriter csv;
  if (!cfg.out_csv.empty())
    csv.open(cfg.out_csv, {"step", "train_accuracy", "eval_accuracy", "loss"});

  TrainResult result;
  int consecutive = 0;
  for (long long step = 1; step <= cfg.steps; ++step) {
    const auto samples = gen_parity_batch(cfg.train_length, cfg.batch, train_rng);
    const auto xs = detail::tokens_to_steps(samples);
    nn::Mat<float> target(1, cfg.batch);
    for (int j = 0; j < cfg.batch; ++j) target.at(0, j) = static_cast<float>(samples[j].label);

    nn::zero_grads(params);
    nn::Lstm<float>::Cache cache;
    const auto& hs = lstm.forward(xs, cache);
    nn::Mat<float> prob = nn::sigmoid(head.forward(hs.back()));
    nn::Mat<float> dprob;
    const double loss = nn::binary_cross_entropy(prob, target, &dprob);

    int correct = 0;
    for (int j = 0; j < cfg.batch; ++j)
      correct += (prob.at(0, j) > 0.5f) == (samples[j].label == 1);

    nn::Mat<float> dz = nn::sigmoid_backward(prob, dprob);
    nn::Mat<float> dh = head.backward(hs.back(), dz);
    std::vector<nn::Mat<float>> dhs(xs.size(), nn::Mat<float>(cfg.hidden, cfg.batch));
    dhs.back() = std::move(dh);
    lstm.backward(xs, cache, dhs);
    opt.step(params);

    result.steps_run = step;
    if (step % cfg.eval_every == 0 || step == cfg.steps) {
      EvalPoint point;
      point.step = step;
      point.train_accuracy = static_cast<double>(correct) / cfg.batch;
      point.eval_accuracy = eval_accuracy(step / cfg.eval_every);
      point.loss = loss;
      result.curve.push_back(point);
      result.final_eval_accuracy = point.eval_accuracy;
      if (csv.is_open())
        csv.row({std::to_string(point.step), CsvWriter::num(point.train_accuracy),
                 CsvWriter::num(point.eval_accuracy), CsvWriter::num(point.loss)});
      consecutive = point.eval_accuracy >= 0.99 ? consecutive + 1 : 0;
      if (consecutive >= 10) {
        result.converged = true;
        if (cfg.stop_on_convergence) break;
      }
    }
  }
  return result;
}

// The policy-network experiment: an LSTM stack, batch normalization, a
// rectifier, a 3-way softmax head, cross-entropy on balanced move classes.
inline TrainResult train_nimsum_policy(const SupervisedConfig& cfg) {
  write_manifest(cfg, "nimsum-policy");
  std::mt19937_64 init_rng = make_rng(cfg.seed, "nimsum-init");
  LstmStack<float> stack(cfg.layers, 1, cfg.hidden, init_rng);
  nn::BatchNorm<float> norm("norm", cfg.hidden);
  nn::Linear<float> head("head", cfg.hidden, 3);
  head.init(init_rng);

  std::vector<nn::Param<float>*> params = stack.parameters();
  for (auto* p : norm.parameters()) params.push_back(p);
  for (auto* p : head.parameters()) params.push_back(p);
  nn::Adam<float> opt(static_cast<float>(cfg.learning_rate));

  std::mt19937_64 train_rng = make_rng(cfg.seed, "nimsum-train");

  auto eval_accuracy = [&](long long eval_index) {
    std::mt19937_64 rng = make_rng(cfg.seed, "nimsum-eval", eval_index);
    norm.training = false;
    size_t correct = 0, total = 0;
    while (total < cfg.eval_samples) {
      const int chunk =
          static_cast<int>(std::min<size_t>(cfg.batch, cfg.eval_samples - total));
      const auto samples = gen_nimsum_batch(cfg.heaps, chunk, rng);
      const auto xs = detail::tokens_to_steps(samples);
      typename LstmStack<float>::Cache cache;
      const auto& hs = stack.forward(xs, cache);
      nn::BatchNorm<float>::Cache bn_cache;
      const nn::Mat<float> probs =
          nn::softmax(head.forward(nn::relu(norm.forward(hs.back(), bn_cache))));
      for (int j = 0; j < chunk; ++j) {
        int argmax = 0;
        for (int c = 1; c < 3; ++c)
          if (probs.at(c, j) > probs.at(argmax, j)) argmax = c;
        correct += argmax == samples[j].label;
      }
      total += chunk;
    }
    norm.training = true;
    return static_cast<double>(correct) / total;
  };

  CsvWriter csv;
  if (!cfg.out_csv.empty())
    csv.open(cfg.out_csv, {"step", "train_accuracy", "eval_accuracy", "loss"});

  TrainResult result;
  int consecutive = 0;
  for (long long step = 1; step <= cfg.steps; ++step) {
    const auto samples = gen_nimsum_batch(cfg.heaps, cfg.batch, train_rng);
    const auto xs = detail::tokens_to_steps(samples);
    nn::Mat<float> target(3, cfg.batch);
    for (int j = 0; j < cfg.batch; ++j) target.at(samples[j].label, j) = 1.0f;

    nn::zero_grads(params);
    typename LstmStack<float>::Cache cache;
    const auto& hs = stack.forward(xs, cache);
    nn::BatchNorm<float>::Cache bn_cache;
    nn::Mat<float> normed = norm.forward(hs.back(), bn_cache);
    nn::Mat<float> rectified = nn::relu(normed);
    nn::Mat<float> probs = nn::softmax(head.forward(rectified));
    nn::Mat<float> dprobs;
    const double loss = nn::cross_entropy(probs, target, &dprobs);

    int correct = 0;
    for (int j = 0; j < cfg.batch; ++j) {
      int argmax = 0;
      for (int c = 1; c < 3; ++c)
        if (probs.at(c, j) > probs.at(argmax, j)) argmax = c;
      correct += argmax == samples[j].label;
    }

    nn::Mat<float> dlogits = nn::softmax_backward(probs, dprobs);
    nn::Mat<float> drect = head.backward(rectified, dlogits);
    nn::Mat<float> dnormed = nn::relu_backward(normed, drect);
    nn::Mat<float> dh = norm.backward(dnormed, bn_cache);
    std::vector<nn::Mat<float>> dhs(xs.size(), nn::Mat<float>(cfg.hidden, cfg.batch));
    dhs.back() = std::move(dh);
    stack.backward(xs, cache, dhs);
    opt.step(params);

    result.steps_run = step;
    if (step % cfg.eval_every == 0 || step == cfg.steps) {
      EvalPoint point;
      point.step = step;
      point.train_accuracy = static_cast<double>(correct) / cfg.batch;
      point.eval_accuracy = eval_accuracy(step / cfg.eval_every);
      point.loss = loss;
      result.curve.push_back(point);
      result.final_eval_accuracy = point.eval_accuracy;
      if (csv.is_open())
        csv.row({std::to_string(point.step), CsvWriter::num(point.train_accuracy),
                 CsvWriter::num(point.eval_accuracy), CsvWriter::num(point.loss)});
      consecutive = point.eval_accuracy >= 0.99 ? consecutive + 1 : 0;
      if (consecutive >= 10) {
        result.converged = true;
        if (cfg.stop_on_convergence) break;
      }
    }
  }
  return result;
}

}  // namespace nimzero::parity
