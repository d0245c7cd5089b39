#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace nimzero {

// All randomness in a run flows from one master seed. Substreams are derived
// by folding a purpose tag and up to two indices through splitmix64, so any
// worker or iteration can rebuild its generator independently:
//
//   seed = splitmix(master ^ fnv1a(tag)); seed = splitmix(seed ^ a); ...
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t fnv1a(std::string_view text) {
  uint64_t h = 1469598103934665603ull;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

inline uint64_t derive_seed(uint64_t master, std::string_view tag, uint64_t a = 0,
                            uint64_t b = 0) {
  uint64_t s = splitmix64(master ^ fnv1a(tag));
  s = splitmix64(s ^ a);
  s = splitmix64(s ^ b);
  return s;
}

inline std::mt19937_64 make_rng(uint64_t master, std::string_view tag, uint64_t a = 0,
                                uint64_t b = 0) {
  return std::mt19937_64(derive_seed(master, tag, a, b));
}

}  // namespace nimzero
