#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "nimzero/game.hpp"

namespace nimzero::oracle {

struct InvalidInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Bitwise xor fold of the heap sizes; zero exactly when the position is lost
// for the player to move.
inline unsigned nim_sum(const std::vector<int>& sizes) {
  unsigned acc = 0;
  for (int v : sizes) acc ^= static_cast<unsigned>(v);
  return acc;
}

struct SizesHash {
  size_t operator()(const std::vector<int>& sizes) const {
    size_t h = 1469598103934665603ull;
    for (int v : sizes) {
      h ^= static_cast<size_t>(v) + 0x9e3779b97f4a7c15ull;
      h *= 1099511628211ull;
    }
    return h;
  }
};

// Memo from canonical position (sorted heap multiset) to its Grundy value.
// Nim is heap-order invariant, so sorting collapses permutations.
class GrundyTable {
 public:
  std::optional<unsigned> lookup(const std::vector<int>& canonical) const {
    auto it = memo_.find(canonical);
    if (it == memo_.end()) return std::nullopt;
    return it->second;
  }
  void store(std::vector<int> canonical, unsigned value) {
    memo_.emplace(std::move(canonical), value);
  }
  size_t size() const { return memo_.size(); }

  // For sharded sweeps: fold another worker's memo into this one.
  void merge_from(GrundyTable&& other) {
    memo_.merge(other.memo_);
  }

 private:
  std::unordered_map<std::vector<int>, unsigned, SizesHash> memo_;
};

inline std::vector<int> canonical_sizes(std::vector<int> sizes) {
  std::sort(sizes.begin(), sizes.end());
  return sizes;
}

inline std::vector<std::vector<int>> nim_successors(const std::vector<int>& sizes) {
  std::vector<std::vector<int>> out;
  for (size_t j = 0; j < sizes.size(); ++j)
    for (int c = 1; c <= sizes[j]; ++c) {
      std::vector<int> next = sizes;
      next[j] -= c;
      out.push_back(std::move(next));
    }
  return out;
}

inline unsigned mex(std::vector<unsigned> values) {
  std::sort(values.begin(), values.end());
  unsigned m = 0;
  for (unsigned v : values) {
    if (v == m) ++m;
    else if (v > m) break;
  }
  return m;
}

// Sprague-Grundy value by mex recursion over one-move successors, memoized
// by canonical form. `successors` makes the recursion reusable for other
// impartial rule sets.
template <class SuccessorFn>
unsigned grundy_value(const std::vector<int>& sizes, GrundyTable& table,
                      SuccessorFn&& successors) {
  std::vector<int> key = canonical_sizes(sizes);
  if (auto hit = table.lookup(key)) return *hit;
  std::vector<unsigned> child_values;
  for (const auto& next : successors(sizes))
    child_values.push_back(grundy_value(next, table, successors));
  const unsigned value = mex(std::move(child_values));
  table.store(std::move(key), value);
  return value;
}

inline unsigned grundy_value(const std::vector<int>& sizes, GrundyTable& table) {
  return grundy_value(sizes, table, nim_successors);
}

// Exhaustive won/lost recursion. Deliberately ignorant of nim_sum: this is
// the independent check for the closed-form rule.
class MinimaxTable {
 public:
  bool won(const std::vector<int>& sizes) {
    std::vector<int> key = canonical_sizes(sizes);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    bool result = false;
    for (size_t j = 0; j < key.size() && !result; ++j) {
      if (j > 0 && key[j] == key[j - 1]) continue;  // same heap size, same subtree
      for (int c = 1; c <= key[j] && !result; ++c) {
        std::vector<int> next = key;
        next[j] -= c;
        result = !won(next);
      }
    }
    memo_.emplace(std::move(key), result);
    return result;
  }
  size_t size() const { return memo_.size(); }

 private:
  std::unordered_map<std::vector<int>, bool, SizesHash> memo_;
};

// Won/lost for the player to move, by brute-force game-tree search.
inline bool minimax_value(const std::vector<int>& sizes, MinimaxTable& table) {
  return table.won(sizes);
}

inline bool minimax_value(const std::vector<int>& sizes) {
  MinimaxTable table;
  return table.won(sizes);
}

// Exactly the moves whose successor position has nim-sum zero; empty iff the
// position itself is lost.
inline std::vector<MoveAction> winning_moves(const NimBoard& board) {
  std::vector<MoveAction> wins;
  for (MoveAction move : legal_moves(board)) {
    std::vector<int> next = board.current;
    next[move.heap] -= move.count;
    if (nim_sum(next) == 0) wins.push_back(move);
  }
  return wins;
}

// Positions whose heaps all hold 0, 1 or 2 counters fall into four classes
// determined by the parities of the one-heap and two-heap counts.
enum class MoveClass : int {
  NoWin = -1,          // even ones, even twos: lost, no winning move
  TakeTwoFromTwo = 0,  // even ones, odd twos
  TakeOneFromOne = 1,  // odd ones, even twos
  TakeOneFromTwo = 2,  // odd ones, odd twos
};

inline MoveClass winning_move_class(const std::vector<int>& sizes) {
  int ones = 0, twos = 0;
  for (int v : sizes) {
    if (v < 0 || v > 2) throw InvalidInput("move classes need heaps of at most 2");
    if (v == 1) ++ones;
    if (v == 2) ++twos;
  }
  const bool odd_ones = ones % 2 != 0;
  const bool odd_twos = twos % 2 != 0;
  if (!odd_ones && !odd_twos) return MoveClass::NoWin;
  if (!odd_ones) return MoveClass::TakeTwoFromTwo;
  if (!odd_twos) return MoveClass::TakeOneFromOne;
  return MoveClass::TakeOneFromTwo;
}

// Classification label used by the supervised policy experiments; NoWin
// positions are excluded from those datasets.
inline int move_class_label(MoveClass cls) {
  if (cls == MoveClass::NoWin) throw InvalidInput("no-win positions carry no class label");
  return static_cast<int>(cls);
}

// A concrete move of the labelled class on the given position.
inline MoveAction move_of_class(const std::vector<int>& sizes, MoveClass cls) {
  if (cls == MoveClass::NoWin) throw InvalidInput("no winning move to construct");
  const int from = cls == MoveClass::TakeOneFromOne ? 1 : 2;
  const int take = cls == MoveClass::TakeTwoFromTwo ? 2 : 1;
  for (size_t j = 0; j < sizes.size(); ++j)
    if (sizes[j] == from) return {static_cast<int>(j), take};
  throw InvalidInput("no heap matches the requested move class");
}

}  // namespace nimzero::oracle
