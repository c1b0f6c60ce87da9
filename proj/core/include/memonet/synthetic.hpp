#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "memonet/data.hpp"

namespace memonet {

/// A planted interaction: p(label = 1 | value_lo, value_hi) = table[lo * card_hi + hi].
struct InformativePair {
  std::size_t lo = 0;
  std::size_t hi = 0;
  std::vector<double> table;  // empty: drawn from Uniform(p_low, p_high)
};

/// Synthetic CTR task with planted cross-feature structure. Field values are
/// uniform; the label probability is the mean of the informative pairs'
/// table entries (or `base_rate` when there are none).
struct GeneratorSpec {
  std::vector<std::size_t> cardinalities;
  std::vector<InformativePair> pairs;
  double base_rate = 0.5;
  double p_low = 0.05;
  double p_high = 0.95;
  std::size_t n_train = 200'000;
  std::size_t n_valid = 20'000;
  std::size_t n_test = 20'000;
  std::uint64_t seed = 1;

  std::size_t num_fields() const { return cardinalities.size(); }
  void validate() const;

  static bool is_key(std::string_view key);
  /// Keys: cardinalities=50,50  pair=0:1[:p,p,...]  base_rate  p_low  p_high
  ///       n_train  n_valid  n_test  seed. `pair` may repeat.
  void set(std::string_view key, std::string_view value);
  static GeneratorSpec parse(std::string_view text);
  std::string to_text() const;
};

struct SyntheticSplit {
  std::size_t num_fields = 0;
  std::vector<std::uint32_t> values;  // N x f
  std::vector<int> labels;
  std::vector<double> bayes;  // true p(label = 1) per row

  std::size_t size() const { return labels.size(); }
};

struct SyntheticData {
  GeneratorSpec spec;  // with every table resolved
  Schema schema;
  SyntheticSplit train, valid, test;
};

/// Draws any missing probability tables; consumes `rng` deterministically.
GeneratorSpec resolve_tables(const GeneratorSpec& spec, std::mt19937_64& rng);

/// Bayes probability of one row of field values under a resolved spec.
double bayes_probability(const GeneratorSpec& resolved, std::span<const std::uint32_t> values);

SyntheticSplit sample_split(const GeneratorSpec& resolved, std::size_t n, std::mt19937_64& rng);

SyntheticData generate(const GeneratorSpec& spec);

Schema synthetic_schema(std::size_t num_fields);

/// Writes schema.txt, train.csv, valid.csv, test.csv and oracle.csv.
void write_dataset(const SyntheticData& data, const std::filesystem::path& dir);

/// AUC of the true probabilities against realized labels.
double bayes_auc(const SyntheticSplit& split);
double bayes_auc(const std::filesystem::path& oracle_csv, const std::filesystem::path& test_csv,
                 const std::string& label_column = "label");

}  // namespace memonet
