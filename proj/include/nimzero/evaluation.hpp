#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "nimzero/agent.hpp"
#include "nimzero/csv.hpp"
#include "nimzero/game.hpp"
#include "nimzero/mcts.hpp"
#include "nimzero/oracle.hpp"
#include "nimzero/rng.hpp"

namespace nimzero::evaluation {

struct EmptySample : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Elo arithmetic

inline double expected_score(double rating_a, double rating_b) {
  return 1.0 / (1.0 + std::pow(10.0, (rating_b - rating_a) / 400.0));
}

// K grows once a player has seen more than `threshold` tournament games.
struct KFactorRule {
  int threshold = 20;
  double fresh = 16.0;
  double veteran = 32.0;

  double k(int matches_played) const { return matches_played > threshold ? veteran : fresh; }
};

inline double update_rating(double rating, bool won, double expected, double k) {
  return rating + k * ((won ? 1.0 : 0.0) - expected);
}

struct RatedAgent {
  std::string checkpoint;  // path or label of the snapshot
  int iteration = 0;
  double rating = 1000.0;
  int matches_played = 0;
  std::shared_ptr<Evaluator> net;  // in-memory snapshot used for play
};

struct EloPool {
  std::vector<RatedAgent> agents;
  KFactorRule k_rule;

  void dump_csv(const std::string& path) const {
    CsvWriter csv(path, {"index", "iteration", "rating", "matches_played"});
    for (size_t i = 0; i < agents.size(); ++i)
      csv.row({std::to_string(i), std::to_string(agents[i].iteration),
               CsvWriter::num(agents[i].rating, 10), std::to_string(agents[i].matches_played)});
  }
};

// ---------------------------------------------------------------------------
// Match play

// A move chooser: the agent side runs an evaluation-mode search, the
// baselines play from the oracle or uniformly at random.
using MovePicker = std::function<MoveAction(const NimBoard&, std::mt19937_64&)>;

inline MovePicker random_mover() {
  return [](const NimBoard& board, std::mt19937_64& rng) {
    const auto moves = legal_moves(board);
    return moves[std::uniform_int_distribution<size_t>(0, moves.size() - 1)(rng)];
  };
}

// Plays a winning move whenever one exists, uniform random otherwise.
inline MovePicker perfect_mover() {
  return [](const NimBoard& board, std::mt19937_64& rng) {
    const auto wins = oracle::winning_moves(board);
    if (!wins.empty())
      return wins[std::uniform_int_distribution<size_t>(0, wins.size() - 1)(rng)];
    const auto moves = legal_moves(board);
    return moves[std::uniform_int_distribution<size_t>(0, moves.size() - 1)(rng)];
  };
}

inline MovePicker agent_mover(Evaluator& net, mcts::SearchConfig config) {
  config = config.for_evaluation();
  return [&net, config](const NimBoard& board, std::mt19937_64& rng) {
    const auto result = mcts::run_search(board, net, config, rng);
    const auto pi = mcts::posterior_policy(result.visit_counts, 0.0);
    for (size_t a = 0; a < pi.size(); ++a)
      if (pi[a] == 1.0) return action_from_index(static_cast<int>(a), board.initial);
    throw std::logic_error("empty search posterior");
  };
}

// First mover is `first`; returns who won and how many plies were played.
inline GameOutcome play_game(const NimBoard& start, const MovePicker& first,
                             const MovePicker& second, std::mt19937_64& rng) {
  NimBoard board = start;
  int ply = 0;
  while (!is_terminal(board)) {
    const MovePicker& picker = ply % 2 == 0 ? first : second;
    board = apply_move(board, picker(board, rng));
    ++ply;
  }
  return {(ply - 1) % 2 == 0 ? Player::First : Player::Second, ply};
}

// ---------------------------------------------------------------------------
// Tournament

// The candidate plays every archived agent, alternating the first seat within
// each pairing; ratings update sequentially game by game, then the candidate
// joins the pool.
inline void tournament_round(EloPool& pool, RatedAgent candidate,
                             const std::vector<int>& capacities,
                             const mcts::SearchConfig& config, int games_per_pairing = 2) {
  CachedEvaluator candidate_eval(*candidate.net);
  const MovePicker candidate_picker = agent_mover(candidate_eval, config);
  const NimBoard start = NimBoard::full(capacities);
  std::mt19937_64 rng(0);  // evaluation-mode games draw no randomness

  for (RatedAgent& opponent : pool.agents) {
    CachedEvaluator opponent_eval(*opponent.net);
    const MovePicker opponent_picker = agent_mover(opponent_eval, config);
    for (int g = 0; g < games_per_pairing; ++g) {
      const bool candidate_first = g % 2 == 0;
      const GameOutcome outcome =
          candidate_first ? play_game(start, candidate_picker, opponent_picker, rng)
                          : play_game(start, opponent_picker, candidate_picker, rng);
      const bool candidate_won =
          (outcome.winner == Player::First) == candidate_first;
      const double e_candidate = expected_score(candidate.rating, opponent.rating);
      const double e_opponent = expected_score(opponent.rating, candidate.rating);
      const double k_candidate = pool.k_rule.k(candidate.matches_played);
      const double k_opponent = pool.k_rule.k(opponent.matches_played);
      candidate.rating = update_rating(candidate.rating, candidate_won, e_candidate, k_candidate);
      opponent.rating = update_rating(opponent.rating, !candidate_won, e_opponent, k_opponent);
      ++candidate.matches_played;
      ++opponent.matches_played;
    }
  }
  pool.agents.push_back(std::move(candidate));
}

// ---------------------------------------------------------------------------
// Position samples

inline std::vector<std::vector<int>> all_positions(const std::vector<int>& capacities,
                                                   bool include_terminal = false) {
  std::vector<std::vector<int>> out;
  enumerate_positions(capacities, [&](const std::vector<int>& sizes) {
    if (!include_terminal && std::all_of(sizes.begin(), sizes.end(), [](int v) { return v == 0; }))
      return;
    out.push_back(sizes);
  });
  return out;
}

inline std::vector<std::vector<int>> sample_positions(const std::vector<int>& capacities,
                                                      size_t count, std::mt19937_64& rng) {
  std::vector<std::vector<int>> out;
  out.reserve(count);
  while (out.size() < count) {
    std::vector<int> sizes(capacities.size());
    bool live = false;
    for (size_t j = 0; j < capacities.size(); ++j) {
      sizes[j] = std::uniform_int_distribution<int>(0, capacities[j])(rng);
      live = live || sizes[j] > 0;
    }
    if (live) out.push_back(std::move(sizes));  // terminal position excluded
  }
  return out;
}

inline std::vector<std::vector<int>> won_positions(const std::vector<std::vector<int>>& sample) {
  std::vector<std::vector<int>> out;
  for (const auto& sizes : sample)
    if (oracle::nim_sum(sizes) != 0) out.push_back(sizes);
  return out;
}

// ---------------------------------------------------------------------------
// Accuracy measurements

struct AccuracyReport {
  std::string board;
  double policy_top1 = 0.0;
  double random_baseline = 0.0;
  double value_sign = 0.0;
  size_t sample_size = 0;       // positions evaluated for the value metric
  size_t won_sample_size = 0;   // won positions evaluated for the policy metric
};

struct PolicyAccuracy {
  double top1 = 0.0;
  double random_baseline = 0.0;
};

// Fraction of won positions whose highest-prior action is a winning move,
// next to the win-rate a uniformly random policy would get on that sample.
// Exact prior ties split fractionally, so a constant policy scores its true
// expectation instead of whatever the lowest tied index happens to be.
inline PolicyAccuracy policy_top1_accuracy(Evaluator& net, const std::vector<int>& capacities,
                                           const std::vector<std::vector<int>>& won_sample) {
  if (won_sample.empty()) throw EmptySample("policy accuracy needs won positions");
  double hits = 0.0;
  double baseline = 0.0;
  for (const auto& sizes : won_sample) {
    const NimBoard board = NimBoard::at(capacities, sizes);
    const auto wins = oracle::winning_moves(board);
    if (wins.empty()) throw EmptySample("sample contains a lost position");
    const NetEvaluation eval = net.evaluate(board);
    const double best = *std::max_element(eval.priors.begin(), eval.priors.end());
    int tied = 0, tied_winning = 0;
    for (size_t a = 0; a < eval.priors.size(); ++a) {
      if (eval.priors[a] != best) continue;
      ++tied;
      const MoveAction move = action_from_index(static_cast<int>(a), capacities);
      if (std::find(wins.begin(), wins.end(), move) != wins.end()) ++tied_winning;
    }
    hits += static_cast<double>(tied_winning) / tied;
    baseline += static_cast<double>(wins.size()) / legal_moves(board).size();
  }
  return {hits / won_sample.size(), baseline / won_sample.size()};
}

// Fraction of positions where sign(v) matches the oracle; v == 0 counts as a
// wrong answer on both kinds of position.
inline double value_sign_accuracy(Evaluator& net, const std::vector<int>& capacities,
                                  const std::vector<std::vector<int>>& sample) {
  if (sample.empty()) throw EmptySample("value accuracy needs positions");
  size_t hits = 0;
  for (const auto& sizes : sample) {
    const double v = net.evaluate(NimBoard::at(capacities, sizes)).value;
    const bool won = oracle::nim_sum(sizes) != 0;
    if (won ? v > 0.0 : v < 0.0) ++hits;
  }
  return static_cast<double>(hits) / sample.size();
}

inline AccuracyReport accuracy_report(Evaluator& net, const std::vector<int>& capacities,
                                      const std::vector<std::vector<int>>& sample) {
  AccuracyReport report;
  report.board = sizes_to_string(capacities);
  report.sample_size = sample.size();
  report.value_sign = value_sign_accuracy(net, capacities, sample);
  const auto won = won_positions(sample);
  report.won_sample_size = won.size();
  const PolicyAccuracy pol = policy_top1_accuracy(net, capacities, won);
  report.policy_top1 = pol.top1;
  report.random_baseline = pol.random_baseline;
  return report;
}

// ---------------------------------------------------------------------------
// Champion and expert measurements

struct ChampionResult {
  double vs_random = 0.0;
  double vs_perfect = 0.0;
  int games = 0;
};

// Win rates as first mover from the full board against a uniformly random
// opponent and against the oracle.
inline ChampionResult champion_test(Evaluator& net, const std::vector<int>& capacities,
                                    const mcts::SearchConfig& config, int games,
                                    std::mt19937_64& rng) {
  const NimBoard start = NimBoard::full(capacities);
  const MovePicker agent = agent_mover(net, config);
  ChampionResult result;
  result.games = games;
  const MovePicker random_opponent = random_mover();
  const MovePicker perfect_opponent = perfect_mover();
  for (int g = 0; g < games; ++g) {
    if (play_game(start, agent, random_opponent, rng).winner == Player::First)
      result.vs_random += 1.0;
    if (play_game(start, agent, perfect_opponent, rng).winner == Player::First)
      result.vs_perfect += 1.0;
  }
  result.vs_random /= games;
  result.vs_perfect /= games;
  return result;
}

// Fraction of won positions where the evaluation-mode search move keeps the
// win (successor nim-sum zero).
inline double expert_test(Evaluator& net, const std::vector<int>& capacities,
                          const std::vector<std::vector<int>>& won_sample,
                          const mcts::SearchConfig& config) {
  if (won_sample.empty()) throw EmptySample("expert test needs won positions");
  const mcts::SearchConfig eval_cfg = config.for_evaluation();
  std::mt19937_64 rng(0);  // evaluation-mode search draws no randomness
  size_t optimal = 0;
  for (const auto& sizes : won_sample) {
    const NimBoard board = NimBoard::at(capacities, sizes);
    const auto result = mcts::run_search(board, net, eval_cfg, rng);
    const auto pi = mcts::posterior_policy(result.visit_counts, 0.0);
    for (size_t a = 0; a < pi.size(); ++a) {
      if (pi[a] == 1.0) {
        std::vector<int> next = sizes;
        const MoveAction move = action_from_index(static_cast<int>(a), capacities);
        next[move.heap] -= move.count;
        if (oracle::nim_sum(next) == 0) ++optimal;
        break;
      }
    }
  }
  return static_cast<double>(optimal) / won_sample.size();
}

// ---------------------------------------------------------------------------
// Position analysis

struct MoveAnalysis {
  MoveAction move;
  bool winning = false;
  double prior = 0.0;     // policy prior for the move
  double value = 0.0;     // value of taking the move, for the player moving
  double win_prob = 0.0;  // 0.5 + value / 2
};

struct WinningMoveTrace {
  MoveAction move;
  std::vector<std::pair<int, double>> posterior_by_sims;
};

struct AnalysisTable {
  std::string board;
  std::vector<MoveAnalysis> top_moves;
  std::vector<WinningMoveTrace> winning_moves;
};

// Reproduces the per-position evaluation tables: the top-k prior moves with
// oracle verdict, prior, value and win probability, plus the search posterior
// of every oracle winning move across a ladder of simulation counts.
inline AnalysisTable analyze_position(Evaluator& net, const NimBoard& board,
                                      const std::vector<int>& sim_ladder,
                                      const mcts::SearchConfig& config, int top_k = 4) {
  AnalysisTable table;
  table.board = sizes_to_string(board.current);
  const NetEvaluation eval = net.evaluate(board);

  std::vector<int> order;
  for (size_t a = 0; a < eval.priors.size(); ++a)
    if (eval.priors[a] > 0.0) order.push_back(static_cast<int>(a));
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return eval.priors[a] > eval.priors[b]; });
  if (static_cast<int>(order.size()) > top_k) order.resize(top_k);

  for (int a : order) {
    MoveAnalysis ma;
    ma.move = action_from_index(a, board.initial);
    const NimBoard next = apply_move(board, ma.move);
    ma.winning = oracle::nim_sum(next.current) == 0;
    ma.prior = eval.priors[a];
    ma.value = is_terminal(next) ? 1.0 : -net.evaluate(next).value;
    ma.win_prob = win_probability(ma.value);
    table.top_moves.push_back(ma);
  }

  const mcts::SearchConfig eval_cfg = config.for_evaluation();
  std::mt19937_64 rng(0);
  for (const MoveAction& win : oracle::winning_moves(board)) {
    WinningMoveTrace trace;
    trace.move = win;
    const int action = action_index(win, board.initial);
    for (int sims : sim_ladder) {
      mcts::SearchConfig cfg = eval_cfg;
      cfg.simulations = sims;
      const auto result = mcts::run_search(board, net, cfg, rng);
      const auto pi = mcts::posterior_policy(result.visit_counts, 1.0);
      trace.posterior_by_sims.emplace_back(sims, pi[action]);
    }
    table.winning_moves.push_back(std::move(trace));
  }
  return table;
}

}  // namespace nimzero::evaluation
