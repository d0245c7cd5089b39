#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace nimzero {

struct IllegalMove : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IndexOutOfRange : std::out_of_range {
  using std::out_of_range::out_of_range;
};

enum class Player : int { First = 0, Second = 1 };

inline Player opponent(Player p) {
  return p == Player::First ? Player::Second : Player::First;
}

// Remove `count` counters from heap `heap` (0-based).
struct MoveAction {
  int heap = 0;
  int count = 0;
  auto operator<=>(const MoveAction&) const = default;
};

// A nim position together with the board it is played on. Boards are
// immutable values: apply_move returns a new board.
struct NimBoard {
  std::vector<int> initial;  // heap capacities, fixed for a game
  std::vector<int> current;  // heap sizes, 0 <= current[j] <= initial[j]

  static NimBoard full(std::vector<int> capacities) {
    NimBoard b{capacities, capacities};
    b.check();
    return b;
  }
  static NimBoard at(std::vector<int> capacities, std::vector<int> sizes) {
    NimBoard b{std::move(capacities), std::move(sizes)};
    b.check();
    return b;
  }

  void check() const {
    if (initial.empty() || initial.size() != current.size())
      throw std::invalid_argument("nim board needs matching, non-empty heap lists");
    for (size_t j = 0; j < initial.size(); ++j) {
      if (initial[j] < 1) throw std::invalid_argument("heap capacity must be positive");
      if (current[j] < 0 || current[j] > initial[j])
        throw std::invalid_argument("heap size out of range");
    }
  }

  int heap_count() const { return static_cast<int>(initial.size()); }
  auto operator<=>(const NimBoard&) const = default;
};

struct GameOutcome {
  Player winner = Player::First;  // the player who removed the last counter
  int move_count = 0;
};

// Unary token rendering of a position: heap j becomes current[j] ones
// followed by (initial[j] - current[j]) zeros, heaps separated by -1.
struct EncodedState {
  std::vector<int8_t> tokens;

  size_t size() const { return tokens.size(); }
  bool operator==(const EncodedState&) const = default;
};

inline bool is_terminal(const NimBoard& board) {
  return std::all_of(board.current.begin(), board.current.end(),
                     [](int v) { return v == 0; });
}

inline int counters_left(const NimBoard& board) {
  return std::accumulate(board.current.begin(), board.current.end(), 0);
}

// One legal move per (heap, 1 <= count <= current[heap]) pair, in increasing
// action-index order.
inline std::vector<MoveAction> legal_moves(const NimBoard& board) {
  std::vector<MoveAction> moves;
  moves.reserve(static_cast<size_t>(counters_left(board)));
  for (int j = 0; j < board.heap_count(); ++j)
    for (int c = 1; c <= board.current[j]; ++c) moves.push_back({j, c});
  return moves;
}

inline bool is_legal(const NimBoard& board, MoveAction move) {
  return move.heap >= 0 && move.heap < board.heap_count() && move.count >= 1 &&
         move.count <= board.current[move.heap];
}

inline NimBoard apply_move(const NimBoard& board, MoveAction move) {
  if (!is_legal(board, move))
    throw IllegalMove("illegal move: heap " + std::to_string(move.heap) +
                      ", count " + std::to_string(move.count));
  NimBoard next = board;
  next.current[move.heap] -= move.count;
  return next;
}

inline size_t encoded_length(const std::vector<int>& capacities) {
  return static_cast<size_t>(std::accumulate(capacities.begin(), capacities.end(), 0)) +
         capacities.size() - 1;
}

inline EncodedState encode_state(const NimBoard& board) {
  EncodedState s;
  s.tokens.reserve(encoded_length(board.initial));
  for (int j = 0; j < board.heap_count(); ++j) {
    if (j > 0) s.tokens.push_back(-1);
    for (int i = 0; i < board.current[j]; ++i) s.tokens.push_back(1);
    for (int i = board.current[j]; i < board.initial[j]; ++i) s.tokens.push_back(0);
  }
  return s;
}

// Number of distinct positions reachable on a board: product of (1 + n_j).
inline unsigned long long position_count(const std::vector<int>& capacities) {
  unsigned long long product = 1;
  for (int n : capacities) {
    if (n < 1) throw std::invalid_argument("heap capacity must be positive");
    if (__builtin_mul_overflow(product, static_cast<unsigned long long>(n) + 1, &product))
      throw std::overflow_error("position count exceeds 64 bits");
  }
  return product;
}

// Size of the fixed action space for a board: sum of capacities.
inline int action_count(const std::vector<int>& capacities) {
  return std::accumulate(capacities.begin(), capacities.end(), 0);
}

// Bijection between moves and [0, action_count): heaps are laid out
// back-to-back, each heap j contributing capacities[j] consecutive indices
// for counts 1..capacities[j].
inline int action_index(MoveAction move, const std::vector<int>& capacities) {
  if (move.heap < 0 || move.heap >= static_cast<int>(capacities.size()) ||
      move.count < 1 || move.count > capacities[move.heap])
    throw IndexOutOfRange("move outside the board's action space");
  int offset = 0;
  for (int i = 0; i < move.heap; ++i) offset += capacities[i];
  return offset + move.count - 1;
}

inline MoveAction action_from_index(int index, const std::vector<int>& capacities) {
  if (index < 0) throw IndexOutOfRange("negative action index");
  int offset = 0;
  for (size_t j = 0; j < capacities.size(); ++j) {
    if (index < offset + capacities[j]) return {static_cast<int>(j), index - offset + 1};
    offset += capacities[j];
  }
  throw IndexOutOfRange("action index " + std::to_string(index) + " out of range");
}

// Heaps are labelled a, b, c, ... in human-readable output; "e9" removes 9
// counters from heap e.
inline char heap_label(int heap) {
  if (heap < 0 || heap >= 26) throw IndexOutOfRange("heap label out of a..z");
  return static_cast<char>('a' + heap);
}

inline std::string move_to_string(MoveAction move) {
  return std::string(1, heap_label(move.heap)) + std::to_string(move.count);
}

inline MoveAction move_from_string(const std::string& text) {
  if (text.size() < 2 || text[0] < 'a' || text[0] > 'z')
    throw std::invalid_argument("move must look like e9: " + text);
  int count = 0;
  for (size_t i = 1; i < text.size(); ++i) {
    if (text[i] < '0' || text[i] > '9')
      throw std::invalid_argument("move must look like e9: " + text);
    count = count * 10 + (text[i] - '0');
  }
  return {text[0] - 'a', count};
}

// "1,3,5,7,9" <-> {1,3,5,7,9}; used for board capacities and positions.
inline std::vector<int> parse_sizes(const std::string& text) {
  std::vector<int> sizes;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    const std::string item = text.substr(pos, comma - pos);
    if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos)
      throw std::invalid_argument("malformed size list: \"" + text + "\"");
    sizes.push_back(std::stoi(item));
    pos = comma + 1;
  }
  if (sizes.empty()) throw std::invalid_argument("empty size list");
  return sizes;
}

inline std::string sizes_to_string(const std::vector<int>& sizes) {
  std::string out;
  for (size_t j = 0; j < sizes.size(); ++j) {
    if (j > 0) out += ',';
    out += std::to_string(sizes[j]);
  }
  return out;
}

// Visits every position of the product space, current[j] in 0..capacities[j],
// in lexicographic order (terminal all-zero position included).
template <class Fn>
void enumerate_positions(const std::vector<int>& capacities, Fn&& fn) {
  std::vector<int> sizes(capacities.size(), 0);
  while (true) {
    fn(std::as_const(sizes));
    size_t j = sizes.size();
    while (j > 0) {
      --j;
      if (sizes[j] < capacities[j]) {
        ++sizes[j];
        std::fill(sizes.begin() + j + 1, sizes.end(), 0);
        break;
      }
      if (j == 0) return;
    }
  }
}

}  // namespace nimzero
