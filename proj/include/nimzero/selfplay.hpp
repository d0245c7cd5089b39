#pragma once

#include <atomic>
#include <chrono>
#include <deque>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "nimzero/agent.hpp"
#include "nimzero/csv.hpp"
#include "nimzero/evaluation.hpp"
#include "nimzero/game.hpp"
#include "nimzero/mcts.hpp"
#include "nimzero/rng.hpp"

namespace nimzero::selfplay {

struct EpisodeStep {
  EncodedState state;
  std::vector<double> posterior;  // over the action space, sums to 1
  Player mover = Player::First;
  int action = -1;      // action index actually played from this state
  double reward = 0.0;  // +1 when mover won the episode, else -1
};

struct Episode {
  std::vector<EpisodeStep> steps;
  Player winner = Player::First;

  int length() const { return static_cast<int>(steps.size()); }
};

struct TrainConfig {
  std::vector<int> board;
  int iterations = 500;
  int start_iteration = 0;  // resume offset; seeds derive from absolute indices
  int episodes_per_iteration = 100;
  int batch_size = 128;
  int replay_window = 5;  // iterations retained in the replay buffer
  int train_batches = 0;  // 0 = one epoch over the newest iteration's steps
  double learning_rate = 1e-3;
  double clip_norm = 0.0;  // 0 disables gradient clipping
  int workers = 8;
  int hidden_size = 128;
  uint64_t seed = 0;
  mcts::SearchConfig search;

  // evaluation hooks
  int eval_every = 1;           // accuracy metrics cadence (0 = never)
  int elo_every = 1;            // tournament cadence (0 = never)
  int elo_games_per_pairing = 2;
  size_t eval_sample_size = 10000;     // used when the state space is large
  size_t exhaustive_eval_limit = 100000;  // sweep everything below this count

  std::string out_dir;  // checkpoints, metrics.csv, elo_pool.csv; empty = memory only

  // 50/60/100 simulations for 5/6/7 heaps unless set explicitly.
  void resolve_defaults() {
    if (search.simulations > 0) return;
    switch (board.size()) {
      case 6: search.simulations = 60; break;
      case 7: search.simulations = 100; break;
      default: search.simulations = 50; break;
    }
  }
};

// One self-play game from the full board. The first temperature_moves plies
// sample from the tau=1 posterior, later plies play the most visited move;
// root noise stays on throughout when the config carries a nonzero epsilon.
inline Episode play_episode(Evaluator& net, const NimBoard& start,
                            const mcts::SearchConfig& config, std::mt19937_64& rng) {
  Episode episode;
  NimBoard board = start;
  mcts::SearchTree tree;
  int ply = 0;
  while (!is_terminal(board)) {
    const auto result = mcts::run_search(board, net, config, rng,
                                         config.tree_reuse ? &tree : nullptr);
    const double tau = ply < config.temperature_moves ? 1.0 : 0.0;
    EpisodeStep step;
    step.state = encode_state(board);
    step.posterior = mcts::posterior_policy(result.visit_counts, tau);
    step.mover = ply % 2 == 0 ? Player::First : Player::Second;

    int action;
    if (tau > 0.0) {
      std::discrete_distribution<int> dist(step.posterior.begin(), step.posterior.end());
      action = dist(rng);
    } else {
      action = static_cast<int>(std::max_element(step.posterior.begin(),
                                                 step.posterior.end()) -
                                step.posterior.begin());
    }
    step.action = action;
    episode.steps.push_back(std::move(step));

    const MoveAction move = action_from_index(action, board.initial);
    if (config.tree_reuse) tree.advance(move);
    board = apply_move(board, move);
    ++ply;
  }
  episode.winner = (ply - 1) % 2 == 0 ? Player::First : Player::Second;
  for (EpisodeStep& step : episode.steps)
    step.reward = step.mover == episode.winner ? 1.0 : -1.0;
  return episode;
}

// Episodes for one iteration, produced by a pool of workers over an immutable
// snapshot. Episode i draws its generator from (seed, iteration, i), so the
// result is identical for any worker count.
inline std::vector<Episode> generate_episodes(const PolicyValueNet& snapshot,
                                              const TrainConfig& config, int iteration) {
  const int count = config.episodes_per_iteration;
  std::vector<Episode> episodes(count);
  const NimBoard start = NimBoard::full(config.board);
  const int workers = std::max(1, std::min(config.workers, count));

  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> failures(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        PolicyValueNet net = snapshot;  // private copy, private cache
        CachedEvaluator cached(net);
        while (true) {
          const int i = next.fetch_add(1);
          if (i >= count) break;
          std::mt19937_64 rng = make_rng(config.seed, "episode", iteration, i);
          episodes[i] = play_episode(cached, start, config.search, rng);
        }
      } catch (...) {
        failures[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& failure : failures)
    if (failure) std::rethrow_exception(failure);
  return episodes;
}

// Keeps the episodes of the most recent `window` iterations.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(int window) : window_(std::max(1, window)) {}

  void push(std::vector<Episode> episodes) {
    iterations_.push_back(std::move(episodes));
    while (iterations_.size() > static_cast<size_t>(window_)) iterations_.pop_front();
    flat_.clear();
    for (const auto& iteration : iterations_)
      for (const Episode& ep : iteration)
        for (const EpisodeStep& step : ep.steps) flat_.push_back(&step);
  }

  size_t episode_count() const {
    size_t n = 0;
    for (const auto& it : iterations_) n += it.size();
    return n;
  }
  size_t step_count() const { return flat_.size(); }
  const std::vector<Episode>& newest() const { return iterations_.back(); }
  const EpisodeStep& step(size_t i) const { return *flat_[i]; }

 private:
  int window_;
  std::deque<std::vector<Episode>> iterations_;
  std::vector<const EpisodeStep*> flat_;
};

struct IterationMetrics {
  double policy_loss = 0.0;
  double value_loss = 0.0;
};

struct EmptyBuffer : std::runtime_error {
  EmptyBuffer() : std::runtime_error("replay buffer is empty") {}
};

// Samples uniform batches from the replay window and runs one Adam pass per
// batch; the default batch count is one epoch over the newest iteration.
inline IterationMetrics training_iteration(PolicyValueNet& net, const ReplayBuffer& buffer,
                                           const TrainConfig& config,
                                           nn::Adam<PolicyValueNet::Real>& opt,
                                           int iteration) {
  if (buffer.step_count() == 0) throw EmptyBuffer();
  size_t newest_steps = 0;
  for (const Episode& ep : buffer.newest()) newest_steps += ep.steps.size();
  const int batches = config.train_batches > 0
                          ? config.train_batches
                          : static_cast<int>((newest_steps + config.batch_size - 1) /
                                             config.batch_size);

  std::mt19937_64 rng = make_rng(config.seed, "train", iteration);
  std::uniform_int_distribution<size_t> pick(0, buffer.step_count() - 1);
  const int actions = action_count(config.board);
  const size_t tokens = encoded_length(config.board);

  IterationMetrics metrics;
  for (int b = 0; b < batches; ++b) {
    PolicyValueNet::TrainBatch batch;
    batch.tokens.assign(tokens, nn::Mat<float>(1, config.batch_size));
    batch.policy_target.resize(actions, config.batch_size);
    batch.value_target.resize(1, config.batch_size);
    for (int j = 0; j < config.batch_size; ++j) {
      const EpisodeStep& step = buffer.step(pick(rng));
      for (size_t t = 0; t < tokens; ++t) batch.tokens[t].at(0, j) = step.state.tokens[t];
      for (int a = 0; a < actions; ++a)
        batch.policy_target.at(a, j) = static_cast<float>(step.posterior[a]);
      batch.value_target.at(0, j) = static_cast<float>(step.reward);
    }
    const auto losses = net.train_step(batch, opt);
    metrics.policy_loss += losses.policy;
    metrics.value_loss += losses.value;
  }
  metrics.policy_loss /= batches;
  metrics.value_loss /= batches;
  return metrics;
}

// One metrics.csv row; hooks that did not run this iteration leave blanks.
struct IterationRow {
  int iteration = 0;
  std::optional<double> elo;
  std::optional<double> policy_top1;
  std::optional<double> random_baseline;
  std::optional<double> value_sign;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double mean_episode_length = 0.0;
  double wall_seconds = 0.0;
};

inline const std::vector<std::string>& metrics_header() {
  static const std::vector<std::string> header{
      "iteration",         "elo",         "policy_top1_accuracy",
      "random_policy_baseline", "value_sign_accuracy", "policy_loss",
      "value_loss",        "mean_episode_length",     "wall_seconds"};
  return header;
}

inline std::vector<std::string> to_csv_row(const IterationRow& row) {
  auto cell = [](const std::optional<double>& v) {
    return v ? CsvWriter::num(*v) : std::string();
  };
  return {std::to_string(row.iteration), cell(row.elo),       cell(row.policy_top1),
          cell(row.random_baseline),     cell(row.value_sign), CsvWriter::num(row.policy_loss),
          CsvWriter::num(row.value_loss), CsvWriter::num(row.mean_episode_length),
          CsvWriter::num(row.wall_seconds)};
}

struct LoopResult {
  std::vector<IterationRow> rows;
  evaluation::EloPool pool;
};

// generate -> train -> evaluate -> checkpoint, `iterations` times. Writes
// metrics.csv, elo_pool.csv and checkpoints/iter_NNNNN.nimz when out_dir is
// set; the initial network is checkpointed before the first iteration.
inline LoopResult full_training_loop(TrainConfig config, PolicyValueNet* initial = nullptr,
                                     const std::function<void(const IterationRow&)>& on_row = {}) {
  namespace fs = std::filesystem;
  config.resolve_defaults();

  PolicyValueNet net = initial ? *initial
                               : PolicyValueNet(config.board, config.hidden_size,
                                                derive_seed(config.seed, "net-init"));
  nn::Adam<PolicyValueNet::Real> opt(static_cast<float>(config.learning_rate));
  opt.clip_norm = static_cast<float>(config.clip_norm);

  CsvWriter metrics;
  std::string checkpoint_dir;
  if (!config.out_dir.empty()) {
    fs::create_directories(config.out_dir);
    checkpoint_dir = (fs::path(config.out_dir) / "checkpoints").string();
    fs::create_directories(checkpoint_dir);
    metrics.open((fs::path(config.out_dir) / "metrics.csv").string(), metrics_header(),
                 config.start_iteration > 0);
  }
  auto checkpoint_path = [&](int iteration) {
    char name[32];
    std::snprintf(name, sizeof name, "iter_%05d.nimz", iteration);
    return (fs::path(checkpoint_dir) / name).string();
  };
  if (!checkpoint_dir.empty()) save_checkpoint(net, checkpoint_path(config.start_iteration));

  // The evaluation sample: the whole space when small, uniform draws when not.
  const bool exhaustive = position_count(config.board) <= config.exhaustive_eval_limit;

  LoopResult result;
  ReplayBuffer buffer(config.replay_window);
  for (int round = 1; round <= config.iterations; ++round) {
    const int iteration = config.start_iteration + round;
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<Episode> episodes = generate_episodes(net, config, iteration);
    double mean_length = 0.0;
    for (const Episode& ep : episodes) mean_length += ep.length();
    mean_length /= episodes.size();
    buffer.push(std::move(episodes));

    const IterationMetrics train = training_iteration(net, buffer, config, opt, iteration);

    IterationRow row;
    row.iteration = iteration;
    row.policy_loss = train.policy_loss;
    row.value_loss = train.value_loss;
    row.mean_episode_length = mean_length;

    CachedEvaluator cached(net);
    if (config.eval_every > 0 && iteration % config.eval_every == 0) {
      std::vector<std::vector<int>> sample;
      if (exhaustive) {
        sample = evaluation::all_positions(config.board);
      } else {
        std::mt19937_64 rng = make_rng(config.seed, "eval-sample", iteration);
        sample = evaluation::sample_positions(config.board, config.eval_sample_size, rng);
      }
      const auto report = evaluation::accuracy_report(cached, config.board, sample);
      row.policy_top1 = report.policy_top1;
      row.random_baseline = report.random_baseline;
      row.value_sign = report.value_sign;
    }
    if (config.elo_every > 0 && iteration % config.elo_every == 0) {
      evaluation::RatedAgent candidate;
      candidate.iteration = iteration;
      candidate.net = std::make_shared<PolicyValueNet>(net);
      candidate.checkpoint = checkpoint_dir.empty() ? "" : checkpoint_path(iteration);
      evaluation::tournament_round(result.pool, std::move(candidate), config.board,
                                   config.search, config.elo_games_per_pairing);
      row.elo = result.pool.agents.back().rating;
      if (!config.out_dir.empty())
        result.pool.dump_csv((fs::path(config.out_dir) / "elo_pool.csv").string());
    }

    if (!checkpoint_dir.empty()) save_checkpoint(net, checkpoint_path(iteration));
    row.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (metrics.is_open()) metrics.row(to_csv_row(row));
    if (on_row) on_row(row);
    result.rows.push_back(row);
  }
  return result;
}

}  // namespace nimzero::selfplay
