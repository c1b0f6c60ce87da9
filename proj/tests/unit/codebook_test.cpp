#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <random>
#include <set>

#include "memonet/codebook.hpp"
#include "memonet/data.hpp"
#include "hash_vectors.hpp"
#include "test_support.hpp"

namespace memonet {
namespace {

TEST(Fnv, ReferenceValues) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
  EXPECT_EQ(fnv1a64("bar", fnv1a64("foo")), fnv1a64("foobar"));
}

TEST(Fnv, FrozenAddressVectors) {
  for (const auto& v : testing::kFrozenAddressVectors) {
    EXPECT_EQ(hash_address(v.id, v.t, v.n, v.seed), v.address) << v.id << " t=" << v.t;
  }
}

TEST(Fnv, ChainedCrossHashEqualsJoinedString) {
  std::array<std::uint32_t, 4> chained{};
  cross_address_set_into("0_%5Fx", "3_y%7Cz", 16384, 1, chained);
  for (unsigned t = 1; t <= 4; ++t) {
    EXPECT_EQ(chained[t - 1], hash_address("0_%5Fx|3_y%7Cz", t, 16384, 1));
  }
}

TEST(Fnv, InvalidArguments) {
  EXPECT_THROW(hash_address("x", 1, 0, 0), Error);
  EXPECT_THROW(hash_address("x", 0, 8, 0), Error);
  EXPECT_THROW(Codebook(8, 2, 0, 0), Error);
  EXPECT_THROW(Codebook(8, 2, kMaxHashFunctions + 1, 0), Error);
  EXPECT_THROW(Codebook(0, 2, 2, 0), Error);
}

TEST(Fnv, AddressesAreStableAndInRange) {
  for (std::uint64_t n : {1ULL, 7ULL, 64ULL, 1000003ULL}) {
    for (int i = 0; i < 100; ++i) {
      const std::string id = "3_" + std::to_string(i);
      const auto a = hash_address(id, 2, n, 5);
      EXPECT_LT(a, n);
      EXPECT_EQ(a, hash_address(id, 2, n, 5));
    }
  }
}

// Upper 0.001 critical value of chi-square with 1023 degrees of freedom.
constexpr double kChi2Critical1023 = 1168.497;

double chi_square(const std::vector<double>& counts) {
  double total = 0.0;
  for (double c : counts) total += c;
  const double expected = total / static_cast<double>(counts.size());
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  return chi2;
}

std::string random_id(std::mt19937_64& rng) { return std::to_string(rng() % 40) + "_" + std::to_string(rng()); }

TEST(Fnv, ChiSquareUniformity) {
  constexpr std::size_t kBuckets = 1024;
  std::mt19937_64 rng(2024);
  std::vector<double> per_function[2] = {std::vector<double>(kBuckets), std::vector<double>(kBuckets)};
  std::vector<double> pooled(kBuckets, 0.0);
  const Codebook cb(kBuckets, 1, 2, 0);
  for (std::size_t i = 0; i < 100000; ++i) {
    const auto set = cb.address_set(random_id(rng));
    for (unsigned t = 0; t < 2; ++t) {
      per_function[t][set[t]] += 1.0;
      pooled[set[t]] += 1.0;
    }
  }
  EXPECT_LT(chi_square(per_function[0]), kChi2Critical1023);
  EXPECT_LT(chi_square(per_function[1]), kChi2Critical1023);
  EXPECT_LT(chi_square(pooled), kChi2Critical1023);
}

TEST(Fnv, AllChunkCollisionsDecayWithHashCount) {
  constexpr std::uint64_t n = 1024;
  std::mt19937_64 rng(99);
  const Codebook cb(n, 1, 2, 0);
  std::size_t first = 0, both = 0;
  constexpr std::size_t kPairs = 100000;
  for (std::size_t i = 0; i < kPairs; ++i) {
    const auto a = cb.address_set(random_id(rng));
    const auto b = cb.address_set(random_id(rng));
    if (a[0] == b[0]) ++first;
    if (a == b) ++both;
  }
  EXPECT_NEAR(static_cast<double>(first) / kPairs, 1.0 / n, 0.3 / n);
  EXPECT_LT(static_cast<double>(both) / kPairs, 10.0 / (n * n));
}

TEST(Fnv, HashFunctionsAreNearlyIndependent) {
  constexpr std::uint64_t n = 64;
  std::size_t single = 0, both = 0, pairs = 0;
  std::vector<std::array<std::uint64_t, 2>> addr;
  for (int i = 0; i < 600; ++i) {
    const std::string id = "0_" + std::to_string(i) + "|1_" + std::to_string(i * 7);
    addr.push_back({hash_address(id, 1, n, 0), hash_address(id, 2, n, 0)});
  }
  for (std::size_t i = 0; i < addr.size(); ++i) {
    for (std::size_t j = i + 1; j < addr.size(); ++j) {
      ++pairs;
      if (addr[i][0] == addr[j][0]) ++single;
      if (addr[i][0] == addr[j][0] && addr[i][1] == addr[j][1]) ++both;
    }
  }
  const double p_single = static_cast<double>(single) / pairs;
  const double p_both = static_cast<double>(both) / pairs;
  EXPECT_NEAR(p_single, 1.0 / n, 0.25 / n);
  EXPECT_LT(p_both, 4.0 / (n * n));
}

TEST(Codebook, AddressSetOrderAndDuplicates) {
  const Codebook cb(1, 2, 3, 0);
  EXPECT_EQ(cb.address_set("0_a|1_b"), (std::vector<std::uint32_t>{0, 0, 0}));
  const Codebook big(1000, 2, 3, 9);
  const auto set = big.address_set("0_a|1_b");
  ASSERT_EQ(set.size(), 3u);
  for (unsigned t = 1; t <= 3; ++t) EXPECT_EQ(set[t - 1], hash_address("0_a|1_b", t, 1000, 9));
  std::array<std::uint32_t, 3> via_parts{};
  big.cross_address_set_into("0_a", "1_b", via_parts);
  EXPECT_TRUE(std::equal(set.begin(), set.end(), via_parts.begin()));
}

TEST(Codebook, NormalInitStatistics) {
  Codebook cb(4096, 8, 2, 0);
  std::mt19937_64 rng(1);
  cb.init_normal(rng, 0.01);
  double mean = 0.0, sq = 0.0;
  for (double v : cb.matrix.value.data()) {
    mean += v;
    sq += v * v;
  }
  const double n = static_cast<double>(cb.matrix.value.size());
  mean /= n;
  EXPECT_NEAR(mean, 0.0, 5.0 * 0.01 / std::sqrt(n));
  EXPECT_NEAR(std::sqrt(sq / n), 0.01, 0.0005);
  EXPECT_TRUE(cb.matrix.row_sparse);
}

TEST(Codebook, GatherScatterAddsDuplicateChunks) {
  Codebook cb(3, 2, 2, 0);
  cb.matrix.value = Tensor::from_rows({{1, 2}, {3, 4}, {5, 6}});
  cb.matrix.zero_grad();
  Tape tape;
  const std::vector<std::uint32_t> addresses{2, 2, 0};
  Var chunks = gather_codewords(tape.param(cb.matrix), addresses);
  EXPECT_EQ(chunks.value(), Tensor::from_rows({{5, 6}, {5, 6}, {1, 2}}));
  tape.backward(sum(chunks));
  EXPECT_EQ(cb.matrix.grad, Tensor::from_rows({{1, 1}, {0, 0}, {2, 2}}));
  EXPECT_EQ(std::set<std::uint32_t>(cb.matrix.touched_rows.begin(), cb.matrix.touched_rows.end()),
            (std::set<std::uint32_t>{0, 2}));
}

}  // namespace
}  // namespace memonet
