#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nimzero/agent.hpp"
#include "nimzero/game.hpp"

namespace nimzero::mcts {

struct SearchConfig {
  int simulations = 50;
  double c1 = 0.25;
  double c2 = 19652.0;
  double dirichlet_alpha = 0.35;
  double dirichlet_epsilon = 0.25;  // 0 during evaluation
  int temperature_moves = 3;        // tau = 1 for this many opening plies, then 0
  bool use_legacy_puct = false;     // plain c_puct exploration term instead
  double c_puct = 1.5;
  bool tree_reuse = false;

  SearchConfig for_evaluation() const {
    SearchConfig cfg = *this;
    cfg.dirichlet_epsilon = 0.0;
    cfg.temperature_moves = 0;
    return cfg;
  }
};

struct SearchNode;

struct Edge {
  MoveAction move;
  int action = 0;          // index in the board's action space
  double raw_prior = 0.0;  // P(s,a) straight from the evaluator
  double prior = 0.0;      // after any root noise
  int visits = 0;          // N(s,a)
  double total_value = 0.0;  // W(s,a)
  std::unique_ptr<SearchNode> child;

  double q() const { return visits > 0 ? total_value / visits : 0.0; }
};

struct SearchNode {
  NimBoard board;
  bool terminal = false;
  bool expanded = false;
  int total_visits = 0;  // sum over edge visits
  std::vector<Edge> edges;

  explicit SearchNode(NimBoard b) : board(std::move(b)), terminal(is_terminal(board)) {}
};

// Exploration bonus in the MuZero form:
//   U = P * sqrt(sum_b N) / (1 + N) * (c1 + log((sum_b N + c2 + 1) / c2))
inline double u_term(double prior, int edge_visits, int parent_total_visits,
                     const SearchConfig& cfg) {
  const double explore =
      cfg.c1 + std::log((parent_total_visits + cfg.c2 + 1.0) / cfg.c2);
  return prior * std::sqrt(static_cast<double>(parent_total_visits)) /
         (1.0 + edge_visits) * explore;
}
inline double u_term(const Edge& e, int parent_total_visits, const SearchConfig& cfg) {
  return u_term(e.prior, e.visits, parent_total_visits, cfg);
}

// Classic PUCT bonus, kept as a configurable alternative:
//   U = c_puct * P * sqrt(sum_b N) / (1 + N)
inline double u_term_puct(double prior, int edge_visits, int parent_total_visits,
                          double c_puct) {
  return c_puct * prior * std::sqrt(static_cast<double>(parent_total_visits)) /
         (1.0 + edge_visits);
}
inline double u_term_puct(const Edge& e, int parent_total_visits, double c_puct) {
  return u_term_puct(e.prior, e.visits, parent_total_visits, c_puct);
}

// argmax over Q + U; ties go to the lowest action index (edges are stored in
// increasing action-index order).
inline size_t select_child(const SearchNode& node, const SearchConfig& cfg) {
  size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < node.edges.size(); ++i) {
    const Edge& e = node.edges[i];
    const double u = cfg.use_legacy_puct
                         ? u_term_puct(e, node.total_visits, cfg.c_puct)
                         : u_term(e, node.total_visits, cfg);
    const double score = e.q() + u;
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return best;
}

// Evaluates the node, creates one edge per legal move, and returns the value
// from the perspective of the player to move here.
inline double expand(SearchNode& node, Evaluator& net) {
  const NetEvaluation eval = net.evaluate(node.board);
  const auto moves = legal_moves(node.board);
  node.edges.clear();
  node.edges.reserve(moves.size());
  for (const MoveAction& m : moves) {
    Edge e;
    e.move = m;
    e.action = action_index(m, node.board.initial);
    e.raw_prior = eval.priors[e.action];
    e.prior = e.raw_prior;
    node.edges.push_back(std::move(e));
  }
  node.expanded = true;
  return eval.value;
}

// Mixes a Dirichlet(alpha) sample over the legal actions into the root
// priors: P <- (1 - eps) * P + eps * eta. Mixing always starts from the raw
// expansion priors, so repeated calls do not compound.
inline void apply_root_noise(SearchNode& node, const SearchConfig& cfg,
                             std::mt19937_64& rng) {
  if (cfg.dirichlet_epsilon <= 0.0) {
    for (Edge& e : node.edges) e.prior = e.raw_prior;
    return;
  }
  std::gamma_distribution<double> gamma(cfg.dirichlet_alpha, 1.0);
  std::vector<double> eta(node.edges.size());
  double sum = 0.0;
  for (double& g : eta) {
    g = gamma(rng);
    sum += g;
  }
  for (size_t i = 0; i < eta.size(); ++i) {
    const double noise = sum > 0.0 ? eta[i] / sum : 1.0 / eta.size();
    node.edges[i].prior = (1.0 - cfg.dirichlet_epsilon) * node.edges[i].raw_prior +
                          cfg.dirichlet_epsilon * noise;
  }
}

// A search tree that can be kept across moves when tree_reuse is on.
struct SearchTree {
  std::unique_ptr<SearchNode> root;

  void advance(MoveAction move) {
    if (!root) return;
    for (Edge& e : root->edges) {
      if (e.move == move) {
        root = std::move(e.child);
        return;
      }
    }
    root.reset();
  }
};

struct SearchResult {
  std::vector<int> visit_counts;   // indexed by action index
  std::vector<MoveAction> moves;   // legal moves at the root
  double root_value = 0.0;         // mean backed-up value for the root mover
};

// Runs `simulations` iterations of select -> expand/evaluate -> negamax
// backup. Leaf values come from the evaluator; terminal leaves are -1 for the
// player left without a move. Every simulation increments exactly one root
// edge, so the root visit counts always sum to the simulation count.
inline SearchResult run_search(const NimBoard& board, Evaluator& net,
                               const SearchConfig& cfg, std::mt19937_64& rng,
                               SearchTree* tree = nullptr) {
  if (is_terminal(board)) throw TerminalPosition("cannot search a terminal position");

  std::unique_ptr<SearchNode> scratch_root;
  SearchNode* root;
  if (tree && cfg.tree_reuse) {
    if (!tree->root || tree->root->board != board)
      tree->root = std::make_unique<SearchNode>(board);
    root = tree->root.get();
  } else {
    scratch_root = std::make_unique<SearchNode>(board);
    root = scratch_root.get();
  }

  if (!root->expanded) expand(*root, net);
  apply_root_noise(*root, cfg, rng);

  std::vector<std::pair<SearchNode*, Edge*>> path;
  for (int sim = 0; sim < cfg.simulations; ++sim) {
    path.clear();
    SearchNode* node = root;
    while (node->expanded && !node->terminal) {
      Edge& e = node->edges[select_child(*node, cfg)];
      if (!e.child) e.child = std::make_unique<SearchNode>(apply_move(node->board, e.move));
      path.emplace_back(node, &e);
      node = e.child.get();
    }
    double value = node->terminal ? -1.0 : expand(*node, net);
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
      value = -value;
      it->second->visits += 1;
      it->second->total_value += value;
      it->first->total_visits += 1;
    }
  }

  SearchResult result;
  result.visit_counts.assign(action_count(board.initial), 0);
  result.moves.reserve(root->edges.size());
  double total_w = 0.0;
  for (const Edge& e : root->edges) {
    result.visit_counts[e.action] = e.visits;
    result.moves.push_back(e.move);
    total_w += e.total_value;
  }
  result.root_value = root->total_visits > 0 ? total_w / root->total_visits : 0.0;
  return result;
}

// Temperature-shaped posterior over the action space: tau = 1 is proportional
// to visits, tau = 0 one-hot on the most visited action (lowest index on
// ties), anything else proportional to N^(1/tau).
inline std::vector<double> posterior_policy(const std::vector<int>& visit_counts,
                                            double tau) {
  int total = 0, max_visits = 0;
  for (int n : visit_counts) {
    total += n;
    max_visits = std::max(max_visits, n);
  }
  if (total <= 0) throw std::invalid_argument("posterior needs at least one visit");

  std::vector<double> pi(visit_counts.size(), 0.0);
  if (tau <= 0.0) {
    for (size_t a = 0; a < visit_counts.size(); ++a) {
      if (visit_counts[a] == max_visits) {
        pi[a] = 1.0;
        return pi;
      }
    }
  }
  double norm = 0.0;
  for (size_t a = 0; a < visit_counts.size(); ++a) {
    if (visit_counts[a] == 0) continue;
    pi[a] = std::pow(static_cast<double>(visit_counts[a]) / max_visits, 1.0 / tau);
    norm += pi[a];
  }
  for (double& p : pi) p /= norm;
  return pi;
}

}  // namespace nimzero::mcts
