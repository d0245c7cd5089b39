#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "nimzero/nn/adam.hpp"
#include "nimzero/nn/layers.hpp"
#include "nimzero/nn/losses.hpp"
#include "nimzero/nn/mat.hpp"
#include "support/gradcheck.hpp"

using namespace nimzero;
using nn::Mat;
using nn::Param;
using testsupport::gradient_check;

namespace {

Mat<double> random_mat(int rows, int cols, std::mt19937_64& rng, double scale = 1.0) {
  Mat<double> m(rows, cols);
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (double& x : m.v) x = dist(rng);
  return m;
}

Mat<double> one_hot_targets(int classes, int batch, std::mt19937_64& rng) {
  Mat<double> t(classes, batch);
  std::uniform_int_distribution<int> pick(0, classes - 1);
  for (int j = 0; j < batch; ++j) t.at(pick(rng), j) = 1.0;
  return t;
}

std::vector<Mat<double>> random_sequence(int steps, int in, int batch, std::mt19937_64& rng) {
  std::vector<Mat<double>> xs;
  for (int t = 0; t < steps; ++t) xs.push_back(random_mat(in, batch, rng));
  return xs;
}

}  // namespace

TEST_CASE("matmul kernels agree with naive products") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    std::uniform_int_distribution<int> dim(1, 17);
    const int m = dim(rng), k = dim(rng), n = dim(rng);
    const Mat<double> a = random_mat(m, k, rng);
    const Mat<double> b = random_mat(k, n, rng);
    Mat<double> c(m, n);
    matmul(c, a, b);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) {
        double want = 0;
        for (int p = 0; p < k; ++p) want += a.at(i, p) * b.at(p, j);
        REQUIRE_THAT(c.at(i, j), Catch::Matchers::WithinAbs(want, 1e-12));
      }

    // A * B^T and A^T * B against the plain kernel via explicit transposes.
    Mat<double> bt(n, k);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < n; ++j) bt.at(j, i) = b.at(i, j);
    Mat<double> c2(m, n);
    matmul_abt(c2, a, bt);
    for (size_t i = 0; i < c.v.size(); ++i) REQUIRE_THAT(c2.v[i], Catch::Matchers::WithinAbs(c.v[i], 1e-12));

    Mat<double> at(k, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < k; ++j) at.at(j, i) = a.at(i, j);
    Mat<double> c3(m, n);
    matmul_atb(c3, at, b);
    for (size_t i = 0; i < c.v.size(); ++i) REQUIRE_THAT(c3.v[i], Catch::Matchers::WithinAbs(c.v[i], 1e-12));
  }
}

TEST_CASE("linear layer gradients match finite differences") {
  std::mt19937_64 rng(17);
  for (int config = 0; config < 20; ++config) {
    std::uniform_int_distribution<int> dim(1, 9);
    const int in = dim(rng), out = dim(rng), batch = dim(rng);
    nn::Linear<double> layer("lin", in, out);
    layer.init(rng);
    const Mat<double> x = random_mat(in, batch, rng);
    const Mat<double> target = random_mat(out, batch, rng);

    auto loss = [&] {
      Mat<double> y = layer.forward(x);
      return nn::mse(y, target);
    };
    auto grads = [&] {
      nn::zero_grads(layer.parameters());
      Mat<double> y = layer.forward(x);
      Mat<double> dy;
      nn::mse(y, target, &dy);
      layer.backward(x, dy);
    };
    const auto res = gradient_check(layer.parameters(), loss, grads);
    INFO(res.where);
    CHECK(res.max_rel <= 1e-4);
  }
}

TEST_CASE("lstm basics") {
  std::mt19937_64 rng(5);
  nn::Lstm<double> lstm("lstm", 1, 128);
  lstm.init(rng);
  CHECK(nn::parameter_count(lstm.parameters()) == 4u * (128 * (1 + 128) + 128));

  // 29-token sequence -> 128-dim hidden vector.
  std::vector<Mat<double>> xs;
  for (int t = 0; t < 29; ++t) {
    Mat<double> x(1, 1);
    x.v[0] = (t % 3) - 1;
    xs.push_back(x);
  }
  nn::Lstm<double>::Cache cache;
  const auto& hs = lstm.forward(xs, cache);
  REQUIRE(hs.size() == 29);
  CHECK(hs.back().rows == 128);
  CHECK(hs.back().cols == 1);

  // Determinism: same parameters, same input, identical output.
  nn::Lstm<double>::Cache cache2;
  const auto hs2 = lstm.forward(xs, cache2);
  CHECK(hs2.back().v == hs.back().v);

  // All-zero weights wipe the hidden state.
  nn::Lstm<double> zero("zero", 1, 8);
  std::vector<Mat<double>> xs8 = random_sequence(5, 1, 1, rng);
  nn::Lstm<double>::Cache zc;
  const auto& zh = zero.forward(xs8, zc);
  for (double v : zh.back().v) CHECK(v == 0.0);

  // Streaming inference matches the batched path.
  Mat<double> h, c, scratch;
  lstm.reset_state(h, c);
  for (const auto& x : xs) lstm.step_infer(x.v[0], h, c, scratch);
  for (size_t i = 0; i < h.v.size(); ++i)
    CHECK_THAT(h.v[i], Catch::Matchers::WithinAbs(hs.back().v[i], 1e-12));
}

TEST_CASE("lstm backward needs a forward cache") {
  nn::Lstm<double> lstm("lstm", 1, 4);
  nn::Lstm<double>::Cache cache;
  std::vector<Mat<double>> xs{Mat<double>(1, 1)};
  std::vector<Mat<double>> dhs{Mat<double>(4, 1)};
  CHECK_THROWS_AS(lstm.backward(xs, cache, dhs), nn::MissingCache);
}

TEST_CASE("lstm gradients match finite differences") {
  std::mt19937_64 rng(23);
  for (int config = 0; config < 20; ++config) {
    std::uniform_int_distribution<int> dim(1, 4);
    const int in = dim(rng), hidden = 2 * dim(rng), batch = dim(rng), steps = 1 + dim(rng);
    nn::Lstm<double> lstm("lstm", in, hidden);
    lstm.init(rng);
    const auto xs = random_sequence(steps, in, batch, rng);
    // Random linear functional of every step's hidden state exercises the
    // full time recursion, not just the final step.
    std::vector<Mat<double>> probes;
    for (int t = 0; t < steps; ++t) probes.push_back(random_mat(hidden, batch, rng));

    auto loss = [&] {
      nn::Lstm<double>::Cache cache;
      const auto& hs = lstm.forward(xs, cache);
      double acc = 0;
      for (int t = 0; t < steps; ++t)
        for (size_t i = 0; i < hs[t].v.size(); ++i) acc += hs[t].v[i] * probes[t].v[i];
      return acc;
    };
    auto grads = [&] {
      nn::zero_grads(lstm.parameters());
      nn::Lstm<double>::Cache cache;
      lstm.forward(xs, cache);
      lstm.backward(xs, cache, probes);
    };
    const auto res = gradient_check(lstm.parameters(), loss, grads);
    INFO(res.where);
    CHECK(res.max_rel <= 1e-4);
  }
}

TEST_CASE("stacked lstm propagates input gradients") {
  std::mt19937_64 rng(29);
  for (int config = 0; config < 5; ++config) {
    nn::Lstm<double> lower("lower", 2, 4);
    nn::Lstm<double> upper("upper", 4, 4);
    lower.init(rng);
    upper.init(rng);
    const auto xs = random_sequence(4, 2, 3, rng);
    const Mat<double> probe = random_mat(4, 3, rng);

    auto run = [&](bool backward) {
      nn::Lstm<double>::Cache c1, c2;
      const auto& h1 = lower.forward(xs, c1);
      const auto& h2 = upper.forward(h1, c2);
      double acc = 0;
      for (size_t i = 0; i < h2.back().v.size(); ++i) acc += h2.back().v[i] * probe.v[i];
      if (backward) {
        std::vector<Mat<double>> dhs(h2.size(), Mat<double>(4, 3));
        dhs.back() = probe;
        const auto dmid = upper.backward(h1, c2, dhs);
        lower.backward(xs, c1, dmid);
      }
      return acc;
    };
    std::vector<Param<double>*> params = lower.parameters();
    const auto res = gradient_check(
        params, [&] { return run(false); },
        [&] {
          nn::zero_grads(lower.parameters());
          nn::zero_grads(upper.parameters());
          run(true);
        });
    INFO(res.where);
    CHECK(res.max_rel <= 1e-4);
  }
}

TEST_CASE("batchnorm forward modes") {
  nn::BatchNorm<double> bn("bn", 3);

  // Constant features collapse to the shift parameter.
  Mat<double> x(3, 4);
  for (int j = 0; j < 4; ++j) {
    x.at(0, j) = 5.0;
    x.at(1, j) = -2.0;
    x.at(2, j) = 0.25;
  }
  bn.shift.w.v = {1.0, 2.0, 3.0};
  nn::BatchNorm<double>::Cache cache;
  const Mat<double> y = bn.forward(x, cache);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK_THAT(y.at(i, j), Catch::Matchers::WithinAbs(bn.shift.w.v[i], 1e-6));

  // Standardized input with identity affine passes through.
  nn::BatchNorm<double> id("id", 1);
  Mat<double> z(1, 4);
  z.v = {-1.5, -0.5, 0.5, 1.5};  // mean 0, var 1.25
  nn::BatchNorm<double>::Cache c2;
  const Mat<double> out = id.forward(z, c2);
  const double inv = 1.0 / std::sqrt(1.25 + 1e-5);
  for (int j = 0; j < 4; ++j)
    CHECK_THAT(out.at(0, j), Catch::Matchers::WithinAbs(z.at(0, j) * inv, 1e-9));

  Mat<double> single(3, 1);
  nn::BatchNorm<double>::Cache c3;
  CHECK_THROWS_AS(bn.forward(single, c3), nn::DegenerateBatch);
  bn.training = false;
  CHECK_NOTHROW(bn.forward(single, c3));  // eval mode uses running stats
}

TEST_CASE("batchnorm eval mode applies running statistics") {
  nn::BatchNorm<double> bn("bn", 1);
  bn.momentum = 1.0;  // adopt the batch stats wholesale
  Mat<double> x(1, 2);
  x.v = {1.0, 3.0};  // mean 2, unbiased var 2
  nn::BatchNorm<double>::Cache cache;
  bn.forward(x, cache);
  bn.training = false;
  Mat<double> probe(1, 1);
  probe.v = {2.0};
  const Mat<double> y = bn.forward(probe, cache);
  CHECK_THAT(y.v[0], Catch::Matchers::WithinAbs(0.0, 1e-9));
}

TEST_CASE("batchnorm gradients match finite differences") {
  std::mt19937_64 rng(31);
  for (int config = 0; config < 20; ++config) {
    std::uniform_int_distribution<int> dim(1, 6);
    const int features = dim(rng);
    const int batch = 2 + dim(rng);
    nn::BatchNorm<double> bn("bn", features);
    for (double& g : bn.scale.w.v) g = 0.5 + std::uniform_real_distribution<double>(0, 1)(rng);
    const Mat<double> x = random_mat(features, batch, rng, 2.0);
    const Mat<double> target = random_mat(features, batch, rng);

    auto loss = [&] {
      nn::BatchNorm<double>::Cache cache;
      Mat<double> y = bn.forward(x, cache);
      return nn::mse(y, target);
    };
    auto grads = [&] {
      nn::zero_grads(bn.parameters());
      nn::BatchNorm<double>::Cache cache;
      Mat<double> y = bn.forward(x, cache);
      Mat<double> dy;
      nn::mse(y, target, &dy);
      bn.backward(dy, cache);
    };
    const auto res = gradient_check(bn.parameters(), loss, grads);
    INFO(res.where);
    CHECK(res.max_rel <= 1e-4);
  }
}

TEST_CASE("loss values") {
  // One-hot target hit exactly: zero cross-entropy.
  Mat<double> p(4, 1);
  p.v = {0.0, 1.0, 0.0, 0.0};
  Mat<double> t(4, 1);
  t.v = {0.0, 1.0, 0.0, 0.0};
  CHECK_THAT(nn::cross_entropy(p, t), Catch::Matchers::WithinAbs(0.0, 1e-12));

  // Uniform prediction over 4 classes: ln 4.
  Mat<double> u(4, 1);
  u.v = {0.25, 0.25, 0.25, 0.25};
  CHECK_THAT(nn::cross_entropy(u, t), Catch::Matchers::WithinAbs(std::log(4.0), 1e-12));

  // Zero predicted probability is clamped, not -inf.
  Mat<double> zero(4, 1);
  CHECK(std::isfinite(nn::cross_entropy(zero, t)));

  Mat<double> v(1, 1), r(1, 1);
  v.v = {0.37};
  r.v = {0.37};
  CHECK(nn::mse(v, r) == 0.0);
  r.v = {-0.63};
  CHECK_THAT(nn::mse(v, r), Catch::Matchers::WithinAbs(1.0, 1e-12));

  Mat<double> bp(1, 2), bt(1, 2);
  bp.v = {0.5, 0.5};
  bt.v = {1.0, 0.0};
  CHECK_THAT(nn::binary_cross_entropy(bp, bt), Catch::Matchers::WithinAbs(std::log(2.0), 1e-12));
}

TEST_CASE("softmax plus cross entropy gradients match finite differences") {
  std::mt19937_64 rng(37);
  for (int config = 0; config < 20; ++config) {
    std::uniform_int_distribution<int> dim(2, 7);
    const int classes = dim(rng), batch = dim(rng);
    nn::Linear<double> head("head", 3, classes);
    head.init(rng);
    const Mat<double> x = random_mat(3, batch, rng);
    const Mat<double> target = one_hot_targets(classes, batch, rng);

    auto loss = [&] {
      Mat<double> probs = nn::softmax(head.forward(x));
      return nn::cross_entropy(probs, target);
    };
    auto grads = [&] {
      nn::zero_grads(head.parameters());
      Mat<double> logits = head.forward(x);
      Mat<double> probs = nn::softmax(logits);
      Mat<double> dprobs;
      nn::cross_entropy(probs, target, &dprobs);
      Mat<double> dlogits = nn::softmax_backward(probs, dprobs);
      head.backward(x, dlogits);
    };
    const auto res = gradient_check(head.parameters(), loss, grads);
    INFO(res.where);
    CHECK(res.max_rel <= 1e-4);
  }
}

TEST_CASE("sigmoid and tanh head gradients match finite differences") {
  std::mt19937_64 rng(41);
  for (int config = 0; config < 20; ++config) {
    nn::Linear<double> head("head", 4, 1);
    head.init(rng);
    const Mat<double> x = random_mat(4, 3, rng);
    Mat<double> target(1, 3);
    for (double& y : target.v) y = std::uniform_int_distribution<int>(0, 1)(rng);

    const bool use_sigmoid = config % 2 == 0;
    auto loss = [&] {
      Mat<double> z = head.forward(x);
      if (use_sigmoid) return nn::binary_cross_entropy(nn::sigmoid(z), target);
      return nn::mse(nn::tanh_forward(z), target);
    };
    auto grads = [&] {
      nn::zero_grads(head.parameters());
      Mat<double> z = head.forward(x);
      Mat<double> y = use_sigmoid ? nn::sigmoid(z) : nn::tanh_forward(z);
      Mat<double> dy;
      if (use_sigmoid)
        nn::binary_cross_entropy(y, target, &dy);
      else
        nn::mse(y, target, &dy);
      Mat<double> dz = use_sigmoid ? nn::sigmoid_backward(y, dy) : nn::tanh_backward(y, dy);
      head.backward(x, dz);
    };
    const auto res = gradient_check(head.parameters(), loss, grads);
    INFO(res.where);
    CHECK(res.max_rel <= 1e-4);
  }
}

TEST_CASE("gradient of an unused parameter is exactly zero") {
  std::mt19937_64 rng(43);
  nn::Linear<double> used("used", 3, 2);
  nn::Linear<double> unused("unused", 3, 2);
  used.init(rng);
  unused.init(rng);
  const Mat<double> x = random_mat(3, 4, rng);
  const Mat<double> target = random_mat(2, 4, rng);

  nn::zero_grads(used.parameters());
  nn::zero_grads(unused.parameters());
  Mat<double> y = used.forward(x);
  Mat<double> dy;
  nn::mse(y, target, &dy);
  used.backward(x, dy);

  for (double g : unused.weight.g.v) CHECK(g == 0.0);
  for (double g : unused.bias.g.v) CHECK(g == 0.0);
}

TEST_CASE("doubling the loss doubles every gradient") {
  std::mt19937_64 rng(47);
  nn::Linear<double> layer("lin", 3, 2);
  layer.init(rng);
  const Mat<double> x = random_mat(3, 4, rng);
  const Mat<double> target = random_mat(2, 4, rng);

  auto run = [&](double scale) {
    nn::zero_grads(layer.parameters());
    Mat<double> y = layer.forward(x);
    Mat<double> dy;
    nn::mse(y, target, &dy);
    for (double& d : dy.v) d *= scale;
    layer.backward(x, dy);
    return layer.weight.g.v;
  };
  const auto g1 = run(1.0);
  const auto g2 = run(2.0);
  for (size_t i = 0; i < g1.size(); ++i)
    CHECK_THAT(g2[i], Catch::Matchers::WithinAbs(2.0 * g1[i], 1e-12));
}

TEST_CASE("adam update properties") {
  std::mt19937_64 rng(53);
  nn::Linear<double> layer("lin", 2, 2);
  layer.init(rng);
  const auto before = layer.weight.w.v;

  nn::Adam<double> opt(1e-3);
  nn::zero_grads(layer.parameters());
  opt.step(layer.parameters());
  CHECK(layer.weight.w.v == before);  // zero gradient, no movement

  // First step moves each component by ~lr in the direction of -grad.
  nn::zero_grads(layer.parameters());
  layer.weight.g.v = {0.5, -0.25, 2.0, -2.0};
  nn::Adam<double> fresh(1e-3);
  const auto pre = layer.weight.w.v;
  fresh.step(layer.parameters());
  for (size_t i = 0; i < pre.size(); ++i) {
    const double delta = layer.weight.w.v[i] - pre[i];
    CHECK_THAT(std::abs(delta), Catch::Matchers::WithinRel(1e-3, 1e-4));
    CHECK(std::signbit(delta) == !std::signbit(layer.weight.g.v[i]));
  }

  // Equal gradients, equal updates.
  CHECK_THAT(layer.weight.w.v[2] - pre[2], Catch::Matchers::WithinAbs(-(layer.weight.w.v[3] - pre[3]), 1e-15));
}

TEST_CASE("adam aborts on non-finite parameters") {
  nn::Linear<double> layer("lin", 1, 1);
  layer.weight.g.v = {std::numeric_limits<double>::infinity()};
  nn::Adam<double> opt(1e-3);
  CHECK_THROWS_AS(opt.step(layer.parameters()), nn::NonFiniteParameter);
}

TEST_CASE("128-hidden lstm fits a parity training batch perfectly") {
  // Feasible-regime check: length-20 strings, sigmoid read-out, the batch
  // itself must reach 100% accuracy.
  std::mt19937_64 rng(59);
  const int length = 20, batch = 128;
  nn::Lstm<float> lstm("lstm", 1, 128);
  nn::Linear<float> head("head", 128, 1);
  lstm.init(rng);
  head.init(rng);

  std::vector<Mat<float>> xs(length, Mat<float>(1, batch));
  Mat<float> target(1, batch);
  for (int j = 0; j < batch; ++j) {
    int ones = 0;
    for (int t = 0; t < length; ++t) {
      const int tok = std::uniform_int_distribution<int>(-1, 1)(rng);
      xs[t].at(0, j) = static_cast<float>(tok);
      ones += tok == 1;
    }
    target.at(0, j) = static_cast<float>(ones % 2);
  }

  std::vector<Param<float>*> params = lstm.parameters();
  for (auto* p : head.parameters()) params.push_back(p);
  nn::Adam<float> opt(1e-3f);

  bool perfect = false;
  for (int step = 0; step < 2000 && !perfect; ++step) {
    nn::zero_grads(params);
    nn::Lstm<float>::Cache cache;
    const auto& hs = lstm.forward(xs, cache);
    Mat<float> z = head.forward(hs.back());
    Mat<float> prob = nn::sigmoid(z);
    Mat<float> dprob;
    nn::binary_cross_entropy(prob, target, &dprob);

    int correct = 0;
    for (int j = 0; j < batch; ++j)
      correct += (prob.at(0, j) > 0.5f) == (target.at(0, j) > 0.5f);
    if (correct == batch) {
      perfect = true;
      break;
    }

    Mat<float> dz = nn::sigmoid_backward(prob, dprob);
    Mat<float> dh = head.backward(hs.back(), dz);
    std::vector<Mat<float>> dhs(length, Mat<float>(128, batch));
    dhs.back() = dh;
    lstm.backward(xs, cache, dhs);
    opt.step(params);
  }
  CHECK(perfect);
}
