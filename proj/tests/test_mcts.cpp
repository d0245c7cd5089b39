#include <catch2/catch_amalgamated.hpp>

#include <numeric>

#include "nimzero/mcts.hpp"
#include "nimzero/oracle.hpp"
#include "nimzero/rng.hpp"

using namespace nimzero;
using mcts::SearchConfig;

namespace {

MoveAction most_visited(const mcts::SearchResult& result, const std::vector<int>& caps) {
  const auto pi = mcts::posterior_policy(result.visit_counts, 0.0);
  for (size_t a = 0; a < pi.size(); ++a)
    if (pi[a] == 1.0) return action_from_index(static_cast<int>(a), caps);
  FAIL("no move selected");
  return {};
}

}  // namespace

TEST_CASE("exploration term values") {
  SearchConfig cfg;

  CHECK(mcts::u_term(1.0, 0, 0, cfg) == 0.0);
  CHECK(mcts::u_term(0.37, 3, 0, cfg) == 0.0);

  // P=1, N=0, total=1 with the default constants.
  const double expected = 0.25 + std::log((1.0 + 19652.0 + 1.0) / 19652.0);
  CHECK_THAT(mcts::u_term(1.0, 0, 1, cfg), Catch::Matchers::WithinAbs(expected, 1e-12));
  CHECK_THAT(mcts::u_term(1.0, 0, 1, cfg), Catch::Matchers::WithinAbs(0.2501, 2e-4));

  CHECK_THAT(mcts::u_term(0.6, 2, 9, cfg),
             Catch::Matchers::WithinAbs(2.0 * mcts::u_term(0.3, 2, 9, cfg), 1e-12));
}

TEST_CASE("legacy puct term values") {
  CHECK_THAT(mcts::u_term_puct(0.5, 1, 4, 1.5), Catch::Matchers::WithinAbs(0.75, 1e-12));
  CHECK(mcts::u_term_puct(0.5, 1, 0, 1.5) == 0.0);
  CHECK(mcts::u_term_puct(0.5, 1, 4, 0.0) == 0.0);
}

TEST_CASE("select_child prefers value, prior, then low index") {
  OracleStubNet stub;
  mcts::SearchNode node(NimBoard::full({1, 3}));
  mcts::expand(node, stub);
  SearchConfig cfg;

  // Fresh node: all scores equal zero, lowest action index wins.
  CHECK(mcts::select_child(node, cfg) == 0);

  // A visited edge with Q=1 beats unvisited edges with tiny exploration bonus.
  node.edges[2].visits = 1;
  node.edges[2].total_value = 1.0;
  node.total_visits = 1;
  CHECK(mcts::select_child(node, cfg) == 2);
}

TEST_CASE("stub priors dominate selection after the first simulation") {
  OracleStubNet stub;
  SearchConfig cfg;
  cfg.simulations = 1;
  cfg.dirichlet_epsilon = 0.0;
  std::mt19937_64 rng(1);

  mcts::SearchTree tree;
  SearchConfig reuse = cfg;
  reuse.tree_reuse = true;
  const NimBoard board = NimBoard::full({1, 3, 5, 7, 9});
  mcts::run_search(board, stub, reuse, rng, &tree);
  // One simulation done (it went to the lowest-indexed edge a1); with the
  // prior mass all on e9, the next selection must pick e9.
  REQUIRE(tree.root != nullptr);
  CHECK(tree.root->total_visits == 1);
  const size_t chosen = mcts::select_child(*tree.root, reuse);
  CHECK(move_to_string(tree.root->edges[chosen].move) == "e9");
}

TEST_CASE("root noise keeps priors a distribution") {
  OracleStubNet stub;
  mcts::SearchNode node(NimBoard::full({1, 3, 5}));
  mcts::expand(node, stub);
  std::mt19937_64 rng(3);

  SearchConfig cfg;
  cfg.dirichlet_epsilon = 0.0;
  const std::vector<double> before = [&] {
    std::vector<double> p;
    for (const auto& e : node.edges) p.push_back(e.prior);
    return p;
  }();
  mcts::apply_root_noise(node, cfg, rng);
  for (size_t i = 0; i < node.edges.size(); ++i) CHECK(node.edges[i].prior == before[i]);

  cfg.dirichlet_epsilon = 1.0;
  mcts::apply_root_noise(node, cfg, rng);
  double sum = 0.0;
  bool differs = false;
  for (size_t i = 0; i < node.edges.size(); ++i) {
    sum += node.edges[i].prior;
    differs = differs || std::abs(node.edges[i].prior - before[i]) > 1e-6;
  }
  CHECK_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-9));
  CHECK(differs);

  cfg.dirichlet_epsilon = 0.25;
  mcts::apply_root_noise(node, cfg, rng);
  sum = 0.0;
  for (const auto& e : node.edges) sum += e.prior;
  CHECK_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-9));
}

TEST_CASE("single-move boards put every visit on that move") {
  UniformEvaluator net;
  SearchConfig cfg;
  cfg.simulations = 10;
  cfg.dirichlet_epsilon = 0.0;
  std::mt19937_64 rng(5);
  const auto result = mcts::run_search(NimBoard::full({1}), net, cfg, rng);
  CHECK(result.visit_counts[0] == 10);
}

TEST_CASE("search finds the winning move on [2,1] with a uniform net") {
  UniformEvaluator net;
  SearchConfig cfg;
  cfg.simulations = 200;
  cfg.dirichlet_epsilon = 0.0;
  std::mt19937_64 rng(7);
  const std::vector<int> caps{2, 1};
  const auto result = mcts::run_search(NimBoard::full(caps), net, cfg, rng);
  CHECK(most_visited(result, caps) == MoveAction{0, 1});  // to [1,1]
}

TEST_CASE("search follows a perfect evaluator") {
  OracleStubNet stub;
  SearchConfig cfg;
  cfg.simulations = 50;
  cfg.dirichlet_epsilon = 0.0;
  std::mt19937_64 rng(9);
  const std::vector<int> caps{1, 3, 5, 7, 9};
  const auto result = mcts::run_search(NimBoard::full(caps), stub, cfg, rng);
  CHECK(move_to_string(most_visited(result, caps)) == "e9");
}

TEST_CASE("root visits always sum to the simulation count") {
  UniformEvaluator net;
  std::mt19937_64 rng(11);
  const std::vector<int> caps{1, 3, 5};
  for (int sims : {1, 13, 50}) {
    SearchConfig cfg;
    cfg.simulations = sims;
    cfg.dirichlet_epsilon = 0.25;
    enumerate_positions(caps, [&](const std::vector<int>& sizes) {
      if (std::accumulate(sizes.begin(), sizes.end(), 0) == 0) return;
      const auto result =
          mcts::run_search(NimBoard::at(caps, sizes), net, cfg, rng);
      const int total =
          std::accumulate(result.visit_counts.begin(), result.visit_counts.end(), 0);
      REQUIRE(total == sims);
    });
  }
}

TEST_CASE("q values stay within the value bounds") {
  OracleStubNet stub;
  SearchConfig cfg;
  cfg.simulations = 100;
  cfg.dirichlet_epsilon = 0.25;
  cfg.tree_reuse = true;
  std::mt19937_64 rng(13);
  mcts::SearchTree tree;
  mcts::run_search(NimBoard::full({1, 3, 5}), stub, cfg, rng, &tree);
  REQUIRE(tree.root != nullptr);
  std::function<void(const mcts::SearchNode&)> walk = [&](const mcts::SearchNode& node) {
    for (const auto& e : node.edges) {
      CHECK(e.q() >= -1.0);
      CHECK(e.q() <= 1.0);
      if (e.child) walk(*e.child);
    }
  };
  walk(*tree.root);
  CHECK(tree.root->total_visits == 100);
}

TEST_CASE("temperature zero search move is a winning move on every won position") {
  // Exhaustive over [1,2,2] and [1,3,5] with the perfect stub evaluator.
  OracleStubNet stub;
  SearchConfig cfg;
  cfg.simulations = 50;
  cfg.dirichlet_epsilon = 0.0;
  for (const std::vector<int> caps : {std::vector<int>{1, 2, 2}, std::vector<int>{1, 3, 5}}) {
    enumerate_positions(caps, [&](const std::vector<int>& sizes) {
      const NimBoard b = NimBoard::at(caps, sizes);
      if (is_terminal(b) || oracle::nim_sum(sizes) == 0) return;
      std::mt19937_64 rng(17);
      const auto result = mcts::run_search(b, stub, cfg, rng);
      const MoveAction chosen = most_visited(result, caps);
      const auto wins = oracle::winning_moves(b);
      REQUIRE(std::find(wins.begin(), wins.end(), chosen) != wins.end());
    });
  }
}

TEST_CASE("search with a fixed seed reproduces exactly") {
  PolicyValueNet net({1, 3, 5}, 32, 2);
  SearchConfig cfg;
  cfg.simulations = 60;
  cfg.dirichlet_epsilon = 0.25;
  const NimBoard board = NimBoard::full({1, 3, 5});

  auto run = [&] {
    std::mt19937_64 rng = make_rng(42, "search-test");
    return mcts::run_search(board, net, cfg, rng).visit_counts;
  };
  CHECK(run() == run());
}

TEST_CASE("posterior policy shapes") {
  CHECK(mcts::posterior_policy({3, 1}, 1.0) == std::vector<double>{0.75, 0.25});
  CHECK(mcts::posterior_policy({3, 1}, 0.0) == std::vector<double>{1.0, 0.0});
  CHECK(mcts::posterior_policy({2, 2}, 0.0) == std::vector<double>{1.0, 0.0});
  CHECK_THROWS_AS(mcts::posterior_policy({0, 0}, 1.0), std::invalid_argument);

  // General tau sharpens toward the maximum.
  const auto soft = mcts::posterior_policy({4, 2, 0}, 1.0);
  const auto sharp = mcts::posterior_policy({4, 2, 0}, 0.5);
  CHECK(sharp[0] > soft[0]);
  CHECK_THAT(std::accumulate(sharp.begin(), sharp.end(), 0.0),
             Catch::Matchers::WithinAbs(1.0, 1e-12));
  CHECK(sharp[2] == 0.0);
}

TEST_CASE("tree reuse keeps subtree statistics") {
  OracleStubNet stub;
  SearchConfig cfg;
  cfg.simulations = 30;
  cfg.dirichlet_epsilon = 0.0;
  cfg.tree_reuse = true;
  std::mt19937_64 rng(19);

  mcts::SearchTree tree;
  const NimBoard board = NimBoard::full({1, 3, 5});
  const auto result = mcts::run_search(board, stub, cfg, rng, &tree);
  const MoveAction m = most_visited(result, board.initial);
  const NimBoard next = apply_move(board, m);

  tree.advance(m);
  REQUIRE(tree.root != nullptr);
  CHECK(tree.root->board == next);
  const int carried = tree.root->total_visits;
  CHECK(carried > 0);

  mcts::run_search(next, stub, cfg, rng, &tree);
  CHECK(tree.root->total_visits == carried + cfg.simulations);

  // Advancing along an unexplored move clears the tree.
  tree.advance({2, 5});
  CHECK(tree.root == nullptr);
}
