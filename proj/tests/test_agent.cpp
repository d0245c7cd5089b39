#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "nimzero/agent.hpp"
#include "support/gradcheck.hpp"

using namespace nimzero;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("nimzero_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<uintptr_t>(this)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("evaluate masks illegal actions and renormalizes") {
  const std::vector<int> caps{1, 3, 5, 7, 9};
  PolicyValueNet net(caps, 32, 123);

  enumerate_positions(caps, [&](const std::vector<int>& sizes) {
    if (std::all_of(sizes.begin(), sizes.end(), [](int v) { return v == 0; })) return;
    static int stride = 0;
    if (stride++ % 17 != 0) return;  // sample the space, full sweep is elsewhere
    const NimBoard b = NimBoard::at(caps, sizes);
    const NetEvaluation eval = net.evaluate(b);
    REQUIRE(eval.priors.size() == 25);
    double sum = 0.0;
    for (double p : eval.priors) {
      REQUIRE(p >= 0.0);
      sum += p;
    }
    CHECK_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-9));
    CHECK(eval.value >= -1.0);
    CHECK(eval.value <= 1.0);
    // illegal actions carry zero prior
    const auto moves = legal_moves(b);
    std::vector<bool> legal(25, false);
    for (const MoveAction& m : moves) legal[action_index(m, caps)] = true;
    for (int a = 0; a < 25; ++a)
      if (!legal[a]) REQUIRE(eval.priors[a] == 0.0);
  });
}

TEST_CASE("evaluate gives a forced move prior one") {
  PolicyValueNet net({1, 3, 5, 7, 9}, 16, 7);
  const NimBoard b = NimBoard::at({1, 3, 5, 7, 9}, {0, 0, 0, 0, 1});
  const NetEvaluation eval = net.evaluate(b);
  CHECK_THAT(eval.priors[action_index({4, 1}, b.initial)],
             Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("evaluate rejects terminal positions and wrong boards") {
  PolicyValueNet net({1, 3}, 8, 1);
  CHECK_THROWS_AS(net.evaluate(NimBoard::at({1, 3}, {0, 0})), TerminalPosition);
  CHECK_THROWS_AS(net.evaluate(NimBoard::full({1, 3, 5})), CheckpointError);
}

TEST_CASE("evaluate is deterministic for fixed parameters") {
  PolicyValueNet net({1, 3, 5}, 32, 99);
  const NimBoard b = NimBoard::at({1, 3, 5}, {1, 2, 4});
  const NetEvaluation a = net.evaluate(b);
  const NetEvaluation c = net.evaluate(b);
  CHECK(a.priors == c.priors);
  CHECK(a.value == c.value);
}

TEST_CASE("win probability conversion") {
  CHECK(win_probability(0.0) == 0.5);
  CHECK(win_probability(1.0) == 1.0);
  CHECK(win_probability(-1.0) == 0.0);
  CHECK_THAT(win_probability(-0.89), Catch::Matchers::WithinAbs(0.055, 1e-12));
  double prev = -0.1;
  for (double v = -1.0; v <= 1.0; v += 0.125) {
    CHECK(win_probability(v) > prev);
    prev = win_probability(v);
  }
}

TEST_CASE("oracle stub plays perfectly") {
  OracleStubNet stub;
  const NimBoard full = NimBoard::full({1, 3, 5, 7, 9});
  const NetEvaluation eval = stub.evaluate(full);
  CHECK(eval.value == 1.0);
  CHECK_THAT(eval.priors[action_index({4, 9}, full.initial)],
             Catch::Matchers::WithinAbs(1.0, 1e-12));

  const NimBoard lost = NimBoard::at({1, 1}, {1, 1});
  const NetEvaluation lost_eval = stub.evaluate(lost);
  CHECK(lost_eval.value == -1.0);
  CHECK_THAT(lost_eval.priors[0], Catch::Matchers::WithinAbs(0.5, 1e-12));
  CHECK_THAT(lost_eval.priors[1], Catch::Matchers::WithinAbs(0.5, 1e-12));

  const NetEvaluation one = stub.evaluate(NimBoard::full({1}));
  CHECK(one.value == 1.0);
  CHECK_THAT(one.priors[0], Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("cached evaluator memoizes and resets") {
  PolicyValueNet net({1, 3, 5}, 16, 5);
  CachedEvaluator cached(net);
  const NimBoard b = NimBoard::at({1, 3, 5}, {1, 1, 1});
  const NetEvaluation first = cached.evaluate(b);
  const NetEvaluation again = cached.evaluate(b);
  CHECK(first.priors == again.priors);
  CHECK(cached.size() == 1);
  cached.clear();
  CHECK(cached.size() == 0);
}

TEST_CASE("checkpoint round-trip preserves every parameter bit") {
  TempDir dir;
  PolicyValueNet net({1, 3, 5, 7, 9}, 24, 2024);
  save_checkpoint(net, dir.file("net.nimz"));
  PolicyValueNet loaded = load_checkpoint(dir.file("net.nimz"));

  CHECK(loaded.capacities() == net.capacities());
  CHECK(loaded.hidden_size() == 24);
  auto a = net.parameters();
  auto b = loaded.parameters();
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) REQUIRE(a[i]->w.v == b[i]->w.v);

  const NimBoard pos = NimBoard::at({1, 3, 5, 7, 9}, {1, 2, 0, 4, 9});
  const NetEvaluation e1 = net.evaluate(pos);
  const NetEvaluation e2 = loaded.evaluate(pos);
  CHECK(e1.priors == e2.priors);
  CHECK(e1.value == e2.value);
}

TEST_CASE("checkpoint validates board and format") {
  TempDir dir;
  PolicyValueNet net({1, 3, 5}, 8, 3);
  save_checkpoint(net, dir.file("net.nimz"));

  const std::vector<int> other{1, 3, 7};
  CHECK_THROWS_AS(load_checkpoint(dir.file("net.nimz"), &other), CheckpointError);
  const std::vector<int> same{1, 3, 5};
  CHECK_NOTHROW(load_checkpoint(dir.file("net.nimz"), &same));

  // magic header must match
  std::FILE* f = std::fopen(dir.file("junk.nimz").c_str(), "wb");
  std::fwrite("JUNKJUNKJUNK", 1, 12, f);
  std::fclose(f);
  CHECK_THROWS_AS(load_checkpoint(dir.file("junk.nimz")), CheckpointError);

  // truncated payload must be rejected
  std::filesystem::resize_file(dir.file("net.nimz"),
                               std::filesystem::file_size(dir.file("net.nimz")) - 8);
  CHECK_THROWS_AS(load_checkpoint(dir.file("net.nimz")), CheckpointError);
}

TEST_CASE("policy-value training gradients match finite differences") {
  // Double-precision twin of the production net wiring, checked end to end.
  std::mt19937_64 rng(61);
  const std::vector<int> caps{1, 2};
  const int hidden = 6, actions = 3, batch = 4, steps = 4;

  nn::Lstm<double> trunk("trunk", 1, hidden);
  nn::Linear<double> policy("policy", hidden, actions);
  nn::Linear<double> value("value", hidden, 1);
  trunk.init(rng);
  policy.init(rng);
  value.init(rng);

  std::vector<nn::Mat<double>> xs;
  for (int t = 0; t < steps; ++t) {
    nn::Mat<double> x(1, batch);
    for (int j = 0; j < batch; ++j)
      x.at(0, j) = std::uniform_int_distribution<int>(-1, 1)(rng);
    xs.push_back(x);
  }
  nn::Mat<double> pi(actions, batch);
  for (int j = 0; j < batch; ++j) pi.at(std::uniform_int_distribution<int>(0, actions - 1)(rng), j) = 1.0;
  nn::Mat<double> reward(1, batch);
  for (int j = 0; j < batch; ++j) reward.at(0, j) = j % 2 == 0 ? 1.0 : -1.0;

  auto forward = [&](bool backward) {
    nn::Lstm<double>::Cache cache;
    const auto& hs = trunk.forward(xs, cache);
    nn::Mat<double> probs = nn::softmax(policy.forward(hs.back()));
    nn::Mat<double> v = nn::tanh_forward(value.forward(hs.back()));
    nn::Mat<double> dprobs, dv;
    const double lp = nn::cross_entropy(probs, pi, backward ? &dprobs : nullptr);
    const double lv = nn::mse(v, reward, backward ? &dv : nullptr);
    if (backward) {
      nn::Mat<double> dlogits = nn::softmax_backward(probs, dprobs);
      nn::Mat<double> dh = policy.backward(hs.back(), dlogits);
      nn::Mat<double> dpre = nn::tanh_backward(v, dv);
      nn::Mat<double> dh2 = value.backward(hs.back(), dpre);
      for (size_t i = 0; i < dh.v.size(); ++i) dh.v[i] += dh2.v[i];
      std::vector<nn::Mat<double>> dhs(steps, nn::Mat<double>(hidden, batch));
      dhs.back() = std::move(dh);
      trunk.backward(xs, cache, dhs);
    }
    return lp + lv;
  };

  std::vector<nn::Param<double>*> params = trunk.parameters();
  for (auto* p : policy.parameters()) params.push_back(p);
  for (auto* p : value.parameters()) params.push_back(p);

  const auto res = testsupport::gradient_check(
      params, [&] { return forward(false); },
      [&] {
        nn::zero_grads(params);
        forward(true);
      });
  INFO(res.where);
  CHECK(res.max_rel <= 1e-4);
}

TEST_CASE("train_step reduces loss on a fixed batch") {
  PolicyValueNet net({1, 2}, 16, 77);
  PolicyValueNet::TrainBatch batch;
  const NimBoard b = NimBoard::full({1, 2});
  const EncodedState enc = encode_state(b);
  const int B = 8;
  for (size_t t = 0; t < enc.tokens.size(); ++t) {
    nn::Mat<float> x(1, B);
    for (int j = 0; j < B; ++j) x.at(0, j) = enc.tokens[t];
    batch.tokens.push_back(x);
  }
  batch.policy_target.resize(3, B);
  batch.value_target.resize(1, B);
  for (int j = 0; j < B; ++j) {
    batch.policy_target.at(1, j) = 1.0f;  // pretend b1 is always the answer
    batch.value_target.at(0, j) = 1.0f;
  }

  nn::Adam<float> opt(1e-2f);
  const auto first = net.measure(batch);
  for (int i = 0; i < 50; ++i) net.train_step(batch, opt);
  const auto last = net.measure(batch);
  CHECK(last.policy < first.policy);
  CHECK(last.value < first.value);
  CHECK(last.policy < 0.05);
  CHECK(last.value < 0.05);
}
