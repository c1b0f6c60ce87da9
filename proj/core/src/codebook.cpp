#include "memonet/codebook.hpp"

#include <charconv>
#include <string>

namespace memonet {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= kFnvPrime;
  }
  return state;
}

std::uint64_t hash_address(std::string_view id, unsigned t, std::uint64_t n, std::uint64_t seed) {
  if (n == 0) throw Error("hash_address: codebook size must be >= 1");
  if (t == 0) throw Error("hash_address: hash function index is 1-based");
  char buf[48];
  char* p = std::to_chars(buf, buf + 20, seed).ptr;
  *p++ = '#';
  p = std::to_chars(p, p + 10, t).ptr;
  *p++ = '#';
  std::uint64_t h = fnv1a64(std::string_view(buf, static_cast<std::size_t>(p - buf)));
  h = fnv1a64(id, h);
  return h % n;
}

void cross_address_set_into(std::string_view id_lo, std::string_view id_hi, std::uint64_t n,
                            std::uint64_t seed, std::span<std::uint32_t> out) {
  if (n == 0) throw Error("hash_address: codebook size must be >= 1");
  char buf[48];
  char* seed_end = std::to_chars(buf, buf + 20, seed).ptr;
  *seed_end++ = '#';
  for (std::size_t t = 1; t <= out.size(); ++t) {
    char* p = std::to_chars(seed_end, seed_end + 10, t).ptr;
    *p++ = '#';
    std::uint64_t h = fnv1a64(std::string_view(buf, static_cast<std::size_t>(p - buf)));
    h = fnv1a64(id_lo, h);
    h = fnv1a64("|", h);
    h = fnv1a64(id_hi, h);
    out[t - 1] = static_cast<std::uint32_t>(h % n);
  }
}

Codebook::Codebook(std::size_t n_, std::size_t l_, unsigned m_, std::uint64_t seed_)
    : matrix("codebook", Tensor(n_, l_), true), n(n_), l(l_), m(m_), seed(seed_) {
  if (n == 0 || l == 0) throw Error("codebook: n and l must be >= 1");
  if (m == 0 || m > kMaxHashFunctions) {
    throw Error("codebook: m must be in [1, " + std::to_string(kMaxHashFunctions) + "], got " +
                std::to_string(m));
  }
  if (n > UINT32_MAX) throw Error("codebook: n exceeds 32-bit addressing");
}

std::vector<std::uint32_t> Codebook::address_set(std::string_view id) const {
  std::vector<std::uint32_t> out(m);
  address_set_into(id, out);
  return out;
}

void Codebook::address_set_into(std::string_view id, std::span<std::uint32_t> out) const {
  for (unsigned t = 1; t <= m; ++t) {
    out[t - 1] = static_cast<std::uint32_t>(hash_address(id, t, n, seed));
  }
}

void Codebook::cross_address_set_into(std::string_view id_lo, std::string_view id_hi,
                                      std::span<std::uint32_t> out) const {
  memonet::cross_address_set_into(id_lo, id_hi, n, seed, out.first(m));
}

void Codebook::init_normal(std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : matrix.value.data()) v = dist(rng);
}

Var gather_codewords(Var matrix, std::span<const std::uint32_t> addresses) {
  return gather_rows(matrix, addresses);
}

}  // namespace memonet
