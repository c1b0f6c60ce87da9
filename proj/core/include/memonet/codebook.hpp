#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "memonet/tensor.hpp"

namespace memonet {

inline constexpr std::uint64_t kFnvOffsetBasis = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state = kFnvOffsetBasis);

/// Address of `id` under hash function `t` (1-based): FNV-1a 64 over
/// "<seed>#<t>#<id>", reduced modulo n.
std::uint64_t hash_address(std::string_view id, unsigned t, std::uint64_t n, std::uint64_t seed);

inline constexpr unsigned kMaxHashFunctions = 16;

/// Addresses of the cross feature "<id_lo>|<id_hi>" for t = 1..out.size(),
/// hashing the pieces without building the joined string.
void cross_address_set_into(std::string_view id_lo, std::string_view id_hi, std::uint64_t n,
                            std::uint64_t seed, std::span<std::uint32_t> out);

/// n x l codeword memory addressed by m hash functions.
struct Codebook {
  Parameter matrix;
  std::size_t n = 0;
  std::size_t l = 0;
  unsigned m = 0;
  std::uint64_t seed = 0;

  Codebook() = default;
  Codebook(std::size_t n, std::size_t l, unsigned m, std::uint64_t seed);

  /// Addresses for t = 1..m, in hash-function order; duplicates allowed.
  std::vector<std::uint32_t> address_set(std::string_view id) const;
  void address_set_into(std::string_view id, std::span<std::uint32_t> out) const;
  void cross_address_set_into(std::string_view id_lo, std::string_view id_hi,
                              std::span<std::uint32_t> out) const;

  /// i.i.d. normal(0, stddev) codewords.
  void init_normal(std::mt19937_64& rng, double stddev);
};

/// Row-stacks codeword chunks (one row per address, in the given order).
Var gather_codewords(Var matrix, std::span<const std::uint32_t> addresses);

}  // namespace memonet
