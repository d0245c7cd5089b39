// nimzero command line: training, evaluation, oracle queries, position
// analysis and the supervised labs, all driven by one master seed.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "nimzero/agent.hpp"
#include "nimzero/evaluation.hpp"
#include "nimzero/game.hpp"
#include "nimzero/mcts.hpp"
#include "nimzero/oracle.hpp"
#include "nimzero/parity_lab.hpp"
#include "nimzero/selfplay.hpp"

namespace fs = std::filesystem;
using namespace nimzero;

namespace {

std::string default_out_dir(const std::string& kind, const std::string& tag, uint64_t seed) {
  const char* root = std::getenv("NIMZERO_OUT");
  fs::path base = root && *root ? fs::path(root) : fs::path("runs");
  std::string name = kind + "-" + tag + "-s" + std::to_string(seed);
  for (char& c : name)
    if (c == ',') c = '_';
  return (base / name).string();
}

void echo_resolved_config(CLI::App& app, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::ofstream out(fs::path(out_dir) / "config.resolved.ini");
  out << app.config_to_str(true, true);
}

std::string percent(double p, int precision = 1) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f%%", precision, 100.0 * p);
  return buf;
}

struct SearchFlags {
  int simulations = 0;  // 0 = per-board default
  double alpha = 0.35;
  double epsilon = 0.25;
  double c1 = 0.25;
  double c2 = 19652.0;
  double c_puct = 1.5;
  bool legacy_puct = false;
  bool tree_reuse = false;
  int temperature_moves = 3;

  void add_options(CLI::App* cmd, bool with_sims = true) {
    if (with_sims)
      cmd->add_option("--sims", simulations,
                      "simulations per move (default 50/60/100 for 5/6/7 heaps)");
    cmd->add_option("--alpha", alpha, "Dirichlet alpha")->check(CLI::PositiveNumber);
    cmd->add_option("--epsilon", epsilon, "root noise weight during training")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--c1", c1, "exploration constant c1");
    cmd->add_option("--c2", c2, "exploration constant c2")->check(CLI::PositiveNumber);
    cmd->add_option("--c-puct", c_puct, "exploration constant for --legacy-puct");
    cmd->add_flag("--legacy-puct", legacy_puct, "use the plain c_puct exploration term");
    cmd->add_flag("--tree-reuse", tree_reuse, "keep the search tree between moves");
    cmd->add_option("--temperature-moves", temperature_moves,
                    "plies played at temperature 1 during self-play");
  }

  mcts::SearchConfig to_config() const {
    mcts::SearchConfig cfg;
    cfg.simulations = simulations;
    cfg.dirichlet_alpha = alpha;
    cfg.dirichlet_epsilon = epsilon;
    cfg.c1 = c1;
    cfg.c2 = c2;
    cfg.c_puct = c_puct;
    cfg.use_legacy_puct = legacy_puct;
    cfg.tree_reuse = tree_reuse;
    cfg.temperature_moves = temperature_moves;
    return cfg;
  }
};

int run_oracle(const std::string& board_text, const std::string& position_text) {
  const std::vector<int> caps = parse_sizes(board_text);
  const std::vector<int> sizes =
      position_text.empty() ? caps : parse_sizes(position_text);
  const NimBoard board = NimBoard::at(caps, sizes);

  const unsigned sum = oracle::nim_sum(sizes);
  std::string wins_text;
  for (const MoveAction& m : oracle::winning_moves(board)) {
    if (!wins_text.empty()) wins_text += ", ";
    wins_text += move_to_string(m);
  }
  if (wins_text.empty()) wins_text = "(none)";
  std::cout << "nim-sum " << sum << ", " << (sum != 0 ? "WON" : "LOST")
            << ", winning moves: " << wins_text << "\n";

  oracle::GrundyTable grundy;
  std::cout << "grundy value " << oracle::grundy_value(sizes, grundy) << ", position space "
            << position_count(caps) << ", legal moves " << legal_moves(board).size() << "\n";
  return 0;
}

int run_train(selfplay::TrainConfig cfg, const std::string& checkpoint, CLI::App& app) {
  if (!checkpoint.empty()) {
    PolicyValueNet net = load_checkpoint(checkpoint, &cfg.board);
    echo_resolved_config(app, cfg.out_dir);
    std::cout << "resuming from " << checkpoint << " at iteration " << cfg.start_iteration
              << "\n";
    selfplay::full_training_loop(cfg, &net, [](const selfplay::IterationRow& row) {
      std::printf("iter %4d | loss p %.4f v %.4f | len %5.2f%s%s | %.1fs\n", row.iteration,
                  row.policy_loss, row.value_loss, row.mean_episode_length,
                  row.value_sign ? (" | value_sign " + CsvWriter::num(*row.value_sign)).c_str()
                                 : "",
                  row.elo ? (" | elo " + CsvWriter::num(*row.elo)).c_str() : "",
                  row.wall_seconds);
      std::fflush(stdout);
    });
  } else {
    echo_resolved_config(app, cfg.out_dir);
    selfplay::full_training_loop(cfg, nullptr, [](const selfplay::IterationRow& row) {
      std::printf("iter %4d | loss p %.4f v %.4f | len %5.2f%s%s | %.1fs\n", row.iteration,
                  row.policy_loss, row.value_loss, row.mean_episode_length,
                  row.value_sign ? (" | value_sign " + CsvWriter::num(*row.value_sign)).c_str()
                                 : "",
                  row.elo ? (" | elo " + CsvWriter::num(*row.elo)).c_str() : "",
                  row.wall_seconds);
      std::fflush(stdout);
    });
  }
  std::cout << "run directory: " << cfg.out_dir << "\n";
  return 0;
}

int run_evaluate(const std::string& board_text, const std::string& checkpoint,
                 const SearchFlags& search, int games, uint64_t seed, size_t sample_size,
                 const std::string& out_dir) {
  const std::vector<int> caps = parse_sizes(board_text);
  PolicyValueNet net = load_checkpoint(checkpoint, &caps);
  CachedEvaluator cached(net);

  mcts::SearchConfig cfg = search.to_config();
  if (cfg.simulations <= 0) {
    selfplay::TrainConfig defaults;
    defaults.board = caps;
    defaults.search = cfg;
    defaults.resolve_defaults();
    cfg = defaults.search;
  }

  std::vector<std::vector<int>> sample;
  if (position_count(caps) <= 100000) {
    sample = evaluation::all_positions(caps);
  } else {
    std::mt19937_64 rng = make_rng(seed, "eval-sample");
    sample = evaluation::sample_positions(caps, sample_size, rng);
  }
  const auto report = evaluation::accuracy_report(cached, caps, sample);

  std::mt19937_64 rng = make_rng(seed, "champion-test");
  const auto champion = evaluation::champion_test(cached, caps, cfg, games, rng);
  const auto won = evaluation::won_positions(sample);
  const double expert = evaluation::expert_test(cached, caps, won, cfg);

  std::printf("board                %s\n", report.board.c_str());
  std::printf("checkpoint           %s\n", checkpoint.c_str());
  std::printf("positions            %zu\n", report.sample_size);
  std::printf("won positions        %zu\n", report.won_sample_size);
  std::printf("policy_top1          %.4f\n", report.policy_top1);
  std::printf("random_baseline      %.4f\n", report.random_baseline);
  std::printf("value_sign           %.4f\n", report.value_sign);
  std::printf("champion_vs_random   %.4f  (%d games)\n", champion.vs_random, champion.games);
  std::printf("champion_vs_perfect  %.4f  (%d games)\n", champion.vs_perfect, champion.games);
  std::printf("expert               %.4f\n", expert);

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    CsvWriter csv((fs::path(out_dir) / "evaluation.csv").string(),
                  {"board", "checkpoint", "positions", "won_positions", "policy_top1",
                   "random_baseline", "value_sign", "champion_vs_random",
                   "champion_vs_perfect", "expert"},
                  /*append=*/true);
    csv.row({report.board, checkpoint, std::to_string(report.sample_size),
             std::to_string(report.won_sample_size), CsvWriter::num(report.policy_top1),
             CsvWriter::num(report.random_baseline), CsvWriter::num(report.value_sign),
             CsvWriter::num(champion.vs_random), CsvWriter::num(champion.vs_perfect),
             CsvWriter::num(expert)});
    std::cout << "appended to " << (fs::path(out_dir) / "evaluation.csv").string() << "\n";
  }
  return 0;
}

int run_analyze(const std::string& board_text, const std::string& position_text,
                const std::string& checkpoint, const SearchFlags& search,
                const std::string& sims_text, int top_k) {
  const std::vector<int> caps = parse_sizes(board_text);
  const std::vector<int> sizes = position_text.empty() ? caps : parse_sizes(position_text);
  const NimBoard board = NimBoard::at(caps, sizes);

  std::unique_ptr<Evaluator> net;
  if (checkpoint.empty()) {
    net = std::make_unique<OracleStubNet>();  // the exact evaluator as reference
  } else {
    net = std::make_unique<PolicyValueNet>(load_checkpoint(checkpoint, &caps));
  }
  CachedEvaluator cached(*net);

  std::vector<int> ladder;
  for (int s : parse_sizes(sims_text)) ladder.push_back(s);

  const auto table =
      evaluation::analyze_position(cached, board, ladder, search.to_config(), top_k);

  std::printf("position %s on board %s\n\n", table.board.c_str(), board_text.c_str());
  std::printf("%-8s %-8s %-10s %-9s %s\n", "move", "winning", "prior", "V-value", "win-prob");
  for (const auto& row : table.top_moves)
    std::printf("%-8s %-8s %-10s %-+9.3f %s\n", move_to_string(row.move).c_str(),
                row.winning ? "yes" : "no", percent(row.prior).c_str(), row.value,
                percent(row.win_prob).c_str());

  if (table.winning_moves.empty()) {
    std::printf("\nno winning moves in this position\n");
    return 0;
  }
  std::printf("\nposterior probability of each winning move by simulation count\n");
  std::printf("%-8s", "move");
  for (int s : ladder) std::printf(" %10d", s);
  std::printf("\n");
  for (const auto& trace : table.winning_moves) {
    std::printf("%-8s", move_to_string(trace.move).c_str());
    for (const auto& [sims, posterior] : trace.posterior_by_sims)
      std::printf(" %10s", percent(posterior, 2).c_str());
    std::printf("\n");
  }
  return 0;
}

int run_play(const std::string& board_text, const std::string& checkpoint,
             const std::string& opponent, const SearchFlags& search, int games,
             uint64_t seed, bool alternate) {
  const std::vector<int> caps = parse_sizes(board_text);

  std::unique_ptr<Evaluator> net;
  if (checkpoint.empty()) {
    net = std::make_unique<OracleStubNet>();
  } else {
    net = std::make_unique<PolicyValueNet>(load_checkpoint(checkpoint, &caps));
  }
  CachedEvaluator cached(*net);

  mcts::SearchConfig cfg = search.to_config();
  if (cfg.simulations <= 0) cfg.simulations = 50;
  const evaluation::MovePicker agent = evaluation::agent_mover(cached, cfg);
  const evaluation::MovePicker rival =
      opponent == "perfect" ? evaluation::perfect_mover() : evaluation::random_mover();

  std::mt19937_64 rng = make_rng(seed, "play");
  const NimBoard start = NimBoard::full(caps);
  int wins = 0;
  for (int g = 0; g < games; ++g) {
    const bool agent_first = alternate ? g % 2 == 0 : true;
    const GameOutcome outcome = agent_first
                                    ? evaluation::play_game(start, agent, rival, rng)
                                    : evaluation::play_game(start, rival, agent, rng);
    wins += (outcome.winner == Player::First) == agent_first;
  }
  std::printf("agent vs %s on %s: %d/%d wins (%.1f%%)\n", opponent.c_str(),
              board_text.c_str(), wins, games, 100.0 * wins / games);
  return 0;
}

int run_elo(const std::string& run_dir, bool replay, const std::string& board_text,
            const SearchFlags& search, int games, const std::string& out_path) {
  if (!replay) {
    std::ifstream in(fs::path(run_dir) / "elo_pool.csv");
    if (!in) throw std::runtime_error("no elo_pool.csv under " + run_dir);
    std::cout << in.rdbuf();
    return 0;
  }

  const std::vector<int> caps = parse_sizes(board_text);
  mcts::SearchConfig cfg = search.to_config();
  if (cfg.simulations <= 0) cfg.simulations = 50;

  std::vector<fs::path> checkpoints;
  for (const auto& entry : fs::directory_iterator(fs::path(run_dir) / "checkpoints"))
    if (entry.path().extension() == ".nimz") checkpoints.push_back(entry.path());
  std::sort(checkpoints.begin(), checkpoints.end());
  if (checkpoints.empty()) throw std::runtime_error("no checkpoints under " + run_dir);

  evaluation::EloPool pool;
  for (size_t i = 0; i < checkpoints.size(); ++i) {
    evaluation::RatedAgent agent;
    agent.checkpoint = checkpoints[i].string();
    agent.iteration = static_cast<int>(i);
    agent.net = std::make_shared<PolicyValueNet>(load_checkpoint(agent.checkpoint, &caps));
    evaluation::tournament_round(pool, std::move(agent), caps, cfg, games);
    std::fprintf(stderr, "rated %zu/%zu\r", i + 1, checkpoints.size());
  }
  std::fprintf(stderr, "\n");

  const std::string out = out_path.empty() ? (fs::path(run_dir) / "elo_replay.csv").string()
                                           : out_path;
  pool.dump_csv(out);
  std::ifstream in(out);
  std::cout << in.rdbuf();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AlphaZero-style self-play engine for nim, with exact oracles"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.config_formatter(std::make_shared<CLI::ConfigINI>());
  app.set_config("--config", "", "ini file with [subcommand] sections");

  // train ---------------------------------------------------------------
  auto* train = app.add_subcommand("train", "run the self-play training loop");
  std::string train_board = "1,3,5,7,9";
  std::string train_checkpoint;
  selfplay::TrainConfig train_cfg;
  SearchFlags train_search;
  train->add_option("--board", train_board, "heap capacities, e.g. 1,3,5,7,9");
  train->add_option("--iterations", train_cfg.iterations, "training iterations")
      ->check(CLI::NonNegativeNumber);
  train->add_option("--episodes", train_cfg.episodes_per_iteration, "episodes per iteration")
      ->check(CLI::PositiveNumber);
  train->add_option("--workers", train_cfg.workers, "parallel self-play workers")
      ->check(CLI::PositiveNumber);
  train->add_option("--seed", train_cfg.seed, "master seed");
  train->add_option("--lr", train_cfg.learning_rate, "Adam learning rate")
      ->check(CLI::PositiveNumber);
  train->add_option("--batch-size", train_cfg.batch_size, "training batch size")
      ->check(CLI::PositiveNumber);
  train->add_option("--replay-window", train_cfg.replay_window,
                    "iterations retained in the replay buffer")
      ->check(CLI::PositiveNumber);
  train->add_option("--train-batches", train_cfg.train_batches,
                    "gradient steps per iteration (0 = one epoch over the newest episodes)");
  train->add_option("--hidden", train_cfg.hidden_size, "LSTM hidden size")
      ->check(CLI::PositiveNumber);
  train->add_option("--clip-norm", train_cfg.clip_norm, "max gradient norm (0 = off)");
  train->add_option("--eval-every", train_cfg.eval_every, "accuracy hook cadence (0 = never)");
  train->add_option("--elo-every", train_cfg.elo_every, "elo tournament cadence (0 = never)");
  train->add_option("--games-per-pairing", train_cfg.elo_games_per_pairing,
                    "tournament games per pairing")
      ->check(CLI::PositiveNumber);
  train->add_option("--eval-sample", train_cfg.eval_sample_size,
                    "positions sampled for metrics on large boards");
  train->add_option("--out", train_cfg.out_dir, "output directory");
  train->add_option("--checkpoint", train_checkpoint, "resume from this checkpoint");
  train->add_option("--start-iteration", train_cfg.start_iteration,
                    "iteration offset when resuming")
      ->check(CLI::NonNegativeNumber);
  train_search.add_options(train);

  // oracle --------------------------------------------------------------
  auto* oracle_cmd = app.add_subcommand("oracle", "query the exact solver");
  std::string oracle_board = "1,3,5,7,9";
  std::string oracle_position;
  oracle_cmd->add_option("--board", oracle_board, "heap capacities");
  oracle_cmd->add_option("--position", oracle_position, "heap sizes (default: full board)");

  // evaluate ------------------------------------------------------------
  auto* evaluate = app.add_subcommand("evaluate", "accuracy and champion/expert report");
  std::string eval_board = "1,3,5,7,9";
  std::string eval_checkpoint;
  std::string eval_out;
  SearchFlags eval_search;
  int eval_games = 200;
  uint64_t eval_seed = 0;
  size_t eval_sample = 10000;
  evaluate->add_option("--board", eval_board, "heap capacities");
  evaluate->add_option("--checkpoint", eval_checkpoint, "checkpoint to evaluate")->required();
  evaluate->add_option("--games", eval_games, "champion-test games")->check(CLI::PositiveNumber);
  evaluate->add_option("--seed", eval_seed, "master seed");
  evaluate->add_option("--sample", eval_sample, "sampled positions on large boards");
  evaluate->add_option("--out", eval_out, "directory to append evaluation.csv rows");
  eval_search.add_options(evaluate);
  eval_search.epsilon = 0.0;

  // analyze -------------------------------------------------------------
  auto* analyze = app.add_subcommand("analyze", "per-position evaluation table");
  std::string an_board = "1,3,5,7,9";
  std::string an_position;
  std::string an_checkpoint;
  std::string an_sims = "64,256,1024,65536";
  int an_top = 4;
  SearchFlags an_search;
  analyze->add_option("--board", an_board, "heap capacities");
  analyze->add_option("--position", an_position, "heap sizes (default: full board)");
  analyze->add_option("--checkpoint", an_checkpoint,
                      "checkpoint to analyze (default: the exact oracle stub)");
  analyze->add_option("--sims", an_sims, "simulation ladder, e.g. 64,256,1024,65536");
  analyze->add_option("--top", an_top, "prior moves to list")->check(CLI::PositiveNumber);
  an_search.add_options(analyze, /*with_sims=*/false);

  // play ----------------------------------------------------------------
  auto* play = app.add_subcommand("play", "match series against a fixed opponent");
  std::string play_board = "1,3,5,7,9";
  std::string play_checkpoint;
  std::string play_opponent = "random";
  int play_games = 100;
  uint64_t play_seed = 0;
  bool play_alternate = false;
  SearchFlags play_search;
  play->add_option("--board", play_board, "heap capacities");
  play->add_option("--checkpoint", play_checkpoint,
                   "agent checkpoint (default: the exact oracle stub)");
  play->add_option("--opponent", play_opponent, "random or perfect")
      ->check(CLI::IsMember({"random", "perfect"}));
  play->add_option("--games", play_games, "games to play")->check(CLI::PositiveNumber);
  play->add_option("--seed", play_seed, "master seed");
  play->add_flag("--alternate", play_alternate, "alternate the first mover");
  play_search.add_options(play);

  // elo -----------------------------------------------------------------
  auto* elo = app.add_subcommand("elo", "dump or replay a rating pool");
  std::string elo_dir;
  std::string elo_board = "1,3,5,7,9";
  std::string elo_out;
  bool elo_replay = false;
  int elo_games = 2;
  SearchFlags elo_search;
  elo->add_option("--run-dir", elo_dir, "training run directory")->required();
  elo->add_flag("--replay", elo_replay, "re-rate every checkpoint from scratch");
  elo->add_option("--board", elo_board, "heap capacities (replay only)");
  elo->add_option("--games", elo_games, "games per pairing (replay only)")
      ->check(CLI::PositiveNumber);
  elo->add_option("--out", elo_out, "csv output path (replay only)");
  elo_search.add_options(elo);

  // parity --------------------------------------------------------------
  auto* parity_cmd = app.add_subcommand("parity", "supervised parity extrapolation lab");
  parity::SupervisedConfig parity_cfg;
  std::string parity_out;
  parity_cmd->add_option("--length", parity_cfg.train_length, "training string length")
      ->check(CLI::PositiveNumber);
  parity_cmd->add_option("--steps", parity_cfg.steps, "gradient steps")
      ->check(CLI::PositiveNumber);
  parity_cmd->add_option("--lr", parity_cfg.learning_rate, "Adam learning rate")
      ->check(CLI::PositiveNumber);
  parity_cmd->add_option("--hidden", parity_cfg.hidden, "LSTM hidden size")
      ->check(CLI::PositiveNumber);
  parity_cmd->add_option("--seed", parity_cfg.seed, "master seed");
  parity_cmd->add_option("--eval-every", parity_cfg.eval_every, "evaluation cadence")
      ->check(CLI::PositiveNumber);
  parity_cmd->add_option("--eval-samples", parity_cfg.eval_samples, "evaluation set size");
  parity_cmd->add_option("--out", parity_out, "output directory");
  parity_cmd->add_flag("!--no-early-stop", parity_cfg.stop_on_convergence,
                       "run the full step budget even after convergence");

  // nimsum-policy ---------------------------------------------------------
  auto* nimsum_cmd = app.add_subcommand("nimsum-policy", "supervised move-class lab");
  parity::SupervisedConfig nimsum_cfg;
  nimsum_cfg.steps = 100000;
  std::string nimsum_out;
  nimsum_cmd->add_option("--heaps", nimsum_cfg.heaps, "number of {0,1,2} heaps")
      ->check(CLI::PositiveNumber);
  nimsum_cmd->add_option("--layers", nimsum_cfg.layers, "LSTM layers")
      ->check(CLI::Range(1, 10));
  nimsum_cmd->add_option("--steps", nimsum_cfg.steps, "gradient steps")
      ->check(CLI::PositiveNumber);
  nimsum_cmd->add_option("--lr", nimsum_cfg.learning_rate, "Adam learning rate")
      ->check(CLI::PositiveNumber);
  nimsum_cmd->add_option("--hidden", nimsum_cfg.hidden, "LSTM hidden size")
      ->check(CLI::PositiveNumber);
  nimsum_cmd->add_option("--seed", nimsum_cfg.seed, "master seed");
  nimsum_cmd->add_option("--eval-every", nimsum_cfg.eval_every, "evaluation cadence")
      ->check(CLI::PositiveNumber);
  nimsum_cmd->add_option("--eval-samples", nimsum_cfg.eval_samples, "evaluation set size");
  nimsum_cmd->add_option("--out", nimsum_out, "output directory");

  for (CLI::App* sub : {train, oracle_cmd, evaluate, analyze, play, elo, parity_cmd, nimsum_cmd})
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*train) {
      train_cfg.board = parse_sizes(train_board);
      train_cfg.search = train_search.to_config();
      train_cfg.resolve_defaults();
      if (train_cfg.out_dir.empty())
        train_cfg.out_dir = default_out_dir("train", train_board, train_cfg.seed);
      return run_train(train_cfg, train_checkpoint, app);
    }
    if (*oracle_cmd) return run_oracle(oracle_board, oracle_position);
    if (*evaluate)
      return run_evaluate(eval_board, eval_checkpoint, eval_search, eval_games, eval_seed,
                          eval_sample, eval_out);
    if (*analyze)
      return run_analyze(an_board, an_position, an_checkpoint, an_search, an_sims, an_top);
    if (*play)
      return run_play(play_board, play_checkpoint, play_opponent, play_search, play_games,
                      play_seed, play_alternate);
    if (*elo) return run_elo(elo_dir, elo_replay, elo_board, elo_search, elo_games, elo_out);
    if (*parity_cmd) {
      if (parity_out.empty())
        parity_out = default_out_dir("parity", std::to_string(parity_cfg.train_length),
                                     parity_cfg.seed);
      fs::create_directories(parity_out);
      parity_cfg.out_csv = (fs::path(parity_out) / "curve.csv").string();
      parity_cfg.manifest_path = (fs::path(parity_out) / "manifest.txt").string();
      echo_resolved_config(app, parity_out);
      const auto result = parity::train_parity(parity_cfg);
      std::printf("steps %lld, converged %s, eval accuracy %.4f\n", result.steps_run,
                  result.converged ? "yes" : "no", result.final_eval_accuracy);
      std::cout << "run directory: " << parity_out << "\n";
      return 0;
    }
    if (*nimsum_cmd) {
      if (nimsum_out.empty())
        nimsum_out = default_out_dir(
            "nimsum", std::to_string(nimsum_cfg.heaps) + "h" + std::to_string(nimsum_cfg.layers) + "l",
            nimsum_cfg.seed);
      fs::create_directories(nimsum_out);
      nimsum_cfg.stop_on_convergence = false;
      nimsum_cfg.out_csv = (fs::path(nimsum_out) / "curve.csv").string();
      nimsum_cfg.manifest_path = (fs::path(nimsum_out) / "manifest.txt").string();
      echo_resolved_config(app, nimsum_out);
      const auto result = parity::train_nimsum_policy(nimsum_cfg);
      std::printf("steps %lld, final test accuracy %.4f\n", result.steps_run,
                  result.final_eval_accuracy);
      std::cout << "run directory: " << nimsum_out << "\n";
      return 0;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
