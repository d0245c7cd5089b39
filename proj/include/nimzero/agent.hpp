#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "nimzero/game.hpp"
#include "nimzero/nn/adam.hpp"
#include "nimzero/nn/layers.hpp"
#include "nimzero/nn/losses.hpp"
#include "nimzero/oracle.hpp"
#include "nimzero/rng.hpp"

namespace nimzero {

struct TerminalPosition : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Priors over the board's full action space (zero on illegal actions, sum 1
// over the legal ones) plus a value in [-1, 1] from the mover's perspective.
struct NetEvaluation {
  std::vector<double> priors;
  double value = 0.0;
};

class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual NetEvaluation evaluate(const NimBoard& board) = 0;
};

inline double win_probability(double value) { return 0.5 + value / 2.0; }

// Shared LSTM trunk with a softmax policy head over the action space and a
// tanh value head. Scalar tokens from encode_state feed the trunk directly.
class PolicyValueNet : public Evaluator {
 public:
  using Real = float;

  PolicyValueNet(std::vector<int> capacities, int hidden_size = 128, uint64_t seed = 0)
      : capacities_(std::move(capacities)),
        actions_(action_count(capacities_)),
        trunk_("trunk", 1, hidden_size),
        policy_head_("policy", hidden_size, actions_),
        value_head_("value", hidden_size, 1) {
    std::mt19937_64 rng = make_rng(seed, "net-init");
    trunk_.init(rng);
    policy_head_.init(rng);
    value_head_.init(rng);
  }

  const std::vector<int>& capacities() const { return capacities_; }
  int hidden_size() const { return trunk_.hidden; }
  int actions() const { return actions_; }

  NetEvaluation evaluate(const NimBoard& board) override {
    if (board.initial != capacities_)
      throw CheckpointError("board does not match the network's action space");
    if (is_terminal(board)) throw TerminalPosition("cannot evaluate a terminal position");

    const EncodedState enc = encode_state(board);
    trunk_.reset_state(h_, c_);
    for (int8_t token : enc.tokens)
      trunk_.step_infer(static_cast<Real>(token), h_, c_, gate_scratch_);

    const nn::Mat<Real> logits = policy_head_.forward(h_);
    const nn::Mat<Real> probs = nn::softmax(logits);
    const nn::Mat<Real> v = value_head_.forward(h_);

    NetEvaluation out;
    out.value = std::tanh(static_cast<double>(v.v[0]));
    out.priors.assign(actions_, 0.0);
    const auto moves = legal_moves(board);
    double mass = 0.0;
    for (const MoveAction& m : moves) {
      const int a = action_index(m, capacities_);
      out.priors[a] = probs.v[a];
      mass += out.priors[a];
    }
    if (mass > 0.0 && std::isfinite(mass)) {
      for (const MoveAction& m : moves) out.priors[action_index(m, capacities_)] /= mass;
    } else {
      // every legal prior underflowed: fall back to uniform
      for (const MoveAction& m : moves)
        out.priors[action_index(m, capacities_)] = 1.0 / moves.size();
    }
    return out;
  }

  struct TrainBatch {
    std::vector<nn::Mat<Real>> tokens;  // sequence of [1 x B]
    nn::Mat<Real> policy_target;        // [A x B], zero on illegal actions
    nn::Mat<Real> value_target;         // [1 x B]
  };
  struct TrainLosses {
    double policy = 0.0;
    double value = 0.0;
  };

  // One combined cross-entropy + mean-square-error gradient step.
  TrainLosses train_step(const TrainBatch& batch, nn::Adam<Real>& opt) {
    nn::zero_grads(parameters());
    nn::Lstm<Real>::Cache cache;
    const auto& hs = trunk_.forward(batch.tokens, cache);
    const nn::Mat<Real>& top = hs.back();

    nn::Mat<Real> logits = policy_head_.forward(top);
    nn::Mat<Real> probs = nn::softmax(logits);
    nn::Mat<Real> pre_v = value_head_.forward(top);
    nn::Mat<Real> v = nn::tanh_forward(pre_v);

    TrainLosses losses;
    nn::Mat<Real> dprobs, dv;
    losses.policy = nn::cross_entropy(probs, batch.policy_target, &dprobs);
    losses.value = nn::mse(v, batch.value_target, &dv);

    nn::Mat<Real> dlogits = nn::softmax_backward(probs, dprobs);
    nn::Mat<Real> dh = policy_head_.backward(top, dlogits);
    nn::Mat<Real> dpre_v = nn::tanh_backward(v, dv);
    nn::Mat<Real> dh_value = value_head_.backward(top, dpre_v);
    for (size_t i = 0; i < dh.v.size(); ++i) dh.v[i] += dh_value.v[i];

    std::vector<nn::Mat<Real>> dhs(batch.tokens.size(),
                                   nn::Mat<Real>(trunk_.hidden, top.cols));
    dhs.back() = std::move(dh);
    trunk_.backward(batch.tokens, cache, dhs);
    opt.step(parameters());
    return losses;
  }

  // Pure loss evaluation (no gradients, no update).
  TrainLosses measure(const TrainBatch& batch) {
    nn::Lstm<Real>::Cache cache;
    const auto& hs = trunk_.forward(batch.tokens, cache);
    nn::Mat<Real> probs = nn::softmax(policy_head_.forward(hs.back()));
    nn::Mat<Real> v = nn::tanh_forward(value_head_.forward(hs.back()));
    return {nn::cross_entropy(probs, batch.policy_target),
            nn::mse(v, batch.value_target)};
  }

  std::vector<nn::Param<Real>*> parameters() {
    std::vector<nn::Param<Real>*> out = trunk_.parameters();
    for (auto* p : policy_head_.parameters()) out.push_back(p);
    for (auto* p : value_head_.parameters()) out.push_back(p);
    return out;
  }

 private:
  std::vector<int> capacities_;
  int actions_;
  nn::Lstm<Real> trunk_;
  nn::Linear<Real> policy_head_;
  nn::Linear<Real> value_head_;
  // per-instance inference scratch; clone the net per worker
  nn::Mat<Real> h_, c_, gate_scratch_;
};

// Perfect test double: uniform priors over the winning moves when any exist,
// value +1/-1 straight from the nim-sum rule.
class OracleStubNet : public Evaluator {
 public:
  NetEvaluation evaluate(const NimBoard& board) override {
    if (is_terminal(board)) throw TerminalPosition("cannot evaluate a terminal position");
    NetEvaluation out;
    out.priors.assign(action_count(board.initial), 0.0);
    const auto wins = oracle::winning_moves(board);
    if (wins.empty()) {
      out.value = -1.0;
      const auto moves = legal_moves(board);
      for (const MoveAction& m : moves)
        out.priors[action_index(m, board.initial)] = 1.0 / moves.size();
    } else {
      out.value = 1.0;
      for (const MoveAction& m : wins)
        out.priors[action_index(m, board.initial)] = 1.0 / wins.size();
    }
    return out;
  }
};

// Uniform priors, zero value; the knowledge-free baseline.
class UniformEvaluator : public Evaluator {
 public:
  NetEvaluation evaluate(const NimBoard& board) override {
    if (is_terminal(board)) throw TerminalPosition("cannot evaluate a terminal position");
    NetEvaluation out;
    out.priors.assign(action_count(board.initial), 0.0);
    const auto moves = legal_moves(board);
    for (const MoveAction& m : moves)
      out.priors[action_index(m, board.initial)] = 1.0 / moves.size();
    return out;
  }
};

// Memoizes evaluations of a fixed underlying evaluator. Sound because
// evaluation is deterministic for fixed parameters; reset on new snapshots.
class CachedEvaluator : public Evaluator {
 public:
  explicit CachedEvaluator(Evaluator& base) : base_(base) {}

  NetEvaluation evaluate(const NimBoard& board) override {
    auto it = cache_.find(board.current);
    if (it != cache_.end()) return it->second;
    NetEvaluation eval = base_.evaluate(board);
    cache_.emplace(board.current, eval);
    return eval;
  }

  void clear() { cache_.clear(); }
  size_t size() const { return cache_.size(); }

 private:
  Evaluator& base_;
  std::unordered_map<std::vector<int>, NetEvaluation, oracle::SizesHash> cache_;
};

// Checkpoint layout: "NIMZ", u32 version, u32 heap count, u32 capacities,
// u32 hidden size, u32 action count, then all parameters as little-endian
// 32-bit floats in order trunk.w_ih, trunk.w_hh, trunk.bias, policy.weight,
// policy.bias, value.weight, value.bias.
inline constexpr uint32_t kCheckpointVersion = 1;

namespace detail {
static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

inline void write_u32(std::FILE* f, uint32_t v) {
  if (std::fwrite(&v, sizeof v, 1, f) != 1) throw CheckpointError("checkpoint write failed");
}
inline uint32_t read_u32(std::FILE* f) {
  uint32_t v = 0;
  if (std::fread(&v, sizeof v, 1, f) != 1) throw CheckpointError("checkpoint truncated");
  return v;
}
}  // namespace detail

inline void save_checkpoint(PolicyValueNet& net, const std::string& path) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(path.c_str(), "wb"),
                                                    &std::fclose);
  if (!f) throw CheckpointError("cannot open " + path + " for writing");
  if (std::fwrite("NIMZ", 1, 4, f.get()) != 4) throw CheckpointError("checkpoint write failed");
  detail::write_u32(f.get(), kCheckpointVersion);
  detail::write_u32(f.get(), static_cast<uint32_t>(net.capacities().size()));
  for (int cap : net.capacities()) detail::write_u32(f.get(), static_cast<uint32_t>(cap));
  detail::write_u32(f.get(), static_cast<uint32_t>(net.hidden_size()));
  detail::write_u32(f.get(), static_cast<uint32_t>(net.actions()));
  for (auto* p : net.parameters()) {
    static_assert(sizeof(PolicyValueNet::Real) == 4);
    if (std::fwrite(p->w.v.data(), sizeof(float), p->w.v.size(), f.get()) != p->w.v.size())
      throw CheckpointError("checkpoint write failed");
  }
  if (std::fflush(f.get()) != 0) throw CheckpointError("checkpoint flush failed");
}

inline PolicyValueNet load_checkpoint(const std::string& path,
                                      const std::vector<int>* expected_capacities = nullptr) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(path.c_str(), "rb"),
                                                    &std::fclose);
  if (!f) throw CheckpointError("cannot open " + path);
  char magic[4];
  if (std::fread(magic, 1, 4, f.get()) != 4 || std::string(magic, 4) != "NIMZ")
    throw CheckpointError(path + " is not a nimzero checkpoint");
  const uint32_t version = detail::read_u32(f.get());
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const uint32_t heaps = detail::read_u32(f.get());
  if (heaps == 0 || heaps > 1024) throw CheckpointError("implausible heap count");
  std::vector<int> caps(heaps);
  for (uint32_t j = 0; j < heaps; ++j) caps[j] = static_cast<int>(detail::read_u32(f.get()));
  const uint32_t hidden = detail::read_u32(f.get());
  const uint32_t actions = detail::read_u32(f.get());
  if (expected_capacities && caps != *expected_capacities)
    throw CheckpointError("checkpoint was trained on board " + sizes_to_string(caps) +
                          ", not " + sizes_to_string(*expected_capacities));
  if (actions != static_cast<uint32_t>(action_count(caps)))
    throw CheckpointError("checkpoint action space disagrees with its board");

  PolicyValueNet net(caps, static_cast<int>(hidden));
  for (auto* p : net.parameters()) {
    if (std::fread(p->w.v.data(), sizeof(float), p->w.v.size(), f.get()) != p->w.v.size())
      throw CheckpointError("checkpoint truncated in " + p->name);
  }
  char extra;
  if (std::fread(&extra, 1, 1, f.get()) == 1)
    throw CheckpointError("trailing bytes after checkpoint payload");
  return net;
}

}  // namespace nimzero
