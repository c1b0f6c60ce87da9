#include <gtest/gtest.h>

#include <cmath>

#include "memonet/metrics.hpp"
#include "memonet/synthetic.hpp"
#include "test_support.hpp"

namespace memonet {
namespace {

GeneratorSpec two_field(std::size_t card) {
  GeneratorSpec spec;
  spec.cardinalities = {card, card};
  spec.pairs.push_back({0, 1, {}});
  spec.n_train = 300;
  spec.n_valid = 100;
  spec.n_test = 100;
  spec.seed = 4;
  return spec;
}

TEST(GeneratorSpec, ParseAndTextRoundTrip) {
  const auto spec = GeneratorSpec::parse(
      "# task\ncardinalities=2,3,4\npair=0:1:0.1,0.2,0.3,0.4,0.5,0.6\npair=1:2\nn_train=10\nseed=9\n");
  EXPECT_EQ(spec.num_fields(), 3u);
  ASSERT_EQ(spec.pairs.size(), 2u);
  EXPECT_EQ(spec.pairs[0].table.size(), 6u);
  EXPECT_TRUE(spec.pairs[1].table.empty());
  EXPECT_EQ(spec.n_train, 10u);
  const auto again = GeneratorSpec::parse(spec.to_text());
  EXPECT_EQ(again.to_text(), spec.to_text());
}

TEST(GeneratorSpec, ErrorsNameTheLine) {
  try {
    GeneratorSpec::parse("cardinalities=3,3\nn_train=ten\n");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(GeneratorSpec::parse("colour=red\n"), Error);
}

TEST(GeneratorSpec, ValidationRejectsBadSpecs) {
  auto invalid = [](const std::string& text) {
    EXPECT_THROW(GeneratorSpec::parse(text).validate(), Error) << text;
  };
  invalid("cardinalities=3\n");
  invalid("cardinalities=3,0\n");
  invalid("cardinalities=3,3\npair=0:3\n");
  invalid("cardinalities=3,3\npair=1:1\n");
  invalid("cardinalities=2,1\npair=0:1:0.5\n");
  invalid("cardinalities=2,1\npair=0:1:0.5,1.0\n");
  invalid("cardinalities=2,1\nbase_rate=0\n");
  invalid("cardinalities=2,1\np_low=0.9\np_high=0.2\n");
  EXPECT_NO_THROW(two_field(3).validate());
}

TEST(Generate, FixedSeedGivesIdenticalFiles) {
  testing::TempDir a("gena"), b("genb");
  write_dataset(generate(two_field(5)), a.path());
  write_dataset(generate(two_field(5)), b.path());
  for (const char* name : {"schema.txt", "train.csv", "valid.csv", "test.csv", "oracle.csv"}) {
    const auto text = testing::read_text(a / name);
    EXPECT_FALSE(text.empty()) << name;
    EXPECT_EQ(text, testing::read_text(b / name)) << name;
  }
  GeneratorSpec other = two_field(5);
  other.seed = 5;
  write_dataset(generate(other), b.path());
  EXPECT_NE(testing::read_text(a / "train.csv"), testing::read_text(b / "train.csv"));
}

TEST(Generate, FilesHaveTheDocumentedLayout) {
  testing::TempDir dir("genlayout");
  const auto data = generate(two_field(5));
  write_dataset(data, dir.path());
  const auto train = testing::read_text(dir / "train.csv");
  EXPECT_EQ(train.substr(0, train.find('\n')), "f0,f1,label");
  const auto oracle = testing::read_text(dir / "oracle.csv");
  EXPECT_EQ(oracle.substr(0, oracle.find('\n')), "bayes_p");
  EXPECT_EQ(std::count(oracle.begin(), oracle.end(), '\n'), 101);
  EXPECT_EQ(Schema::load(dir / "schema.txt"), synthetic_schema(2));
  EXPECT_NEAR(bayes_auc(dir / "oracle.csv", dir / "test.csv"), bayes_auc(data.test), 1e-12);
}

TEST(Generate, BayesProbabilityIsMeanOverPairs) {
  GeneratorSpec spec;
  spec.cardinalities = {2, 2, 2};
  spec.pairs.push_back({0, 1, {0.1, 0.2, 0.3, 0.4}});
  spec.pairs.push_back({1, 2, {0.5, 0.6, 0.7, 0.8}});
  const std::vector<std::uint32_t> row{1, 0, 1};
  EXPECT_DOUBLE_EQ(bayes_probability(spec, row), (0.3 + 0.6) / 2.0);
  GeneratorSpec none;
  none.cardinalities = {2, 2};
  none.base_rate = 0.3;
  EXPECT_EQ(bayes_probability(none, std::vector<std::uint32_t>{0, 1}), 0.3);
}

TEST(Generate, ResolvedTablesStayInsideBounds) {
  std::mt19937_64 rng(1);
  const auto resolved = resolve_tables(two_field(50), rng);
  ASSERT_EQ(resolved.pairs[0].table.size(), 2500u);
  for (double p : resolved.pairs[0].table) {
    EXPECT_GE(p, 0.05);
    EXPECT_LT(p, 0.95);
  }
}

TEST(Generate, CellRatesWithinBinomialBounds) {
  GeneratorSpec spec;
  spec.cardinalities = {3, 3};
  spec.pairs.push_back({0, 1, {}});
  std::mt19937_64 rng(17);
  const auto resolved = resolve_tables(spec, rng);
  const auto split = sample_split(resolved, 1'000'000, rng);
  std::vector<double> hits(9, 0.0), counts(9, 0.0);
  for (std::size_t i = 0; i < split.size(); ++i) {
    const std::size_t cell = split.values[i * 2] * 3 + split.values[i * 2 + 1];
    counts[cell] += 1.0;
    hits[cell] += split.labels[i];
  }
  for (std::size_t c = 0; c < 9; ++c) {
    const double p = resolved.pairs[0].table[c];
    const double sigma = std::sqrt(p * (1.0 - p) / counts[c]);
    EXPECT_NEAR(hits[c] / counts[c], p, 3.0 * sigma) << "cell " << c;
    EXPECT_NEAR(counts[c], 1e6 / 9.0, 5.0 * std::sqrt(1e6 / 9.0));
  }
}

TEST(BayesAuc, FairCoinIsHalf) {
  GeneratorSpec spec = two_field(4);
  spec.pairs[0].table.assign(16, 0.5);
  spec.n_test = 20000;
  const auto data = generate(spec);
  // Every score ties, so the AUC is exactly one half.
  EXPECT_EQ(bayes_auc(data.test), 0.5);
  double mean = 0.0;
  for (int y : data.test.labels) mean += y;
  EXPECT_NEAR(mean / 20000.0, 0.5, 4.0 * std::sqrt(0.25 / 20000.0));
}

TEST(BayesAuc, TwoCellClosedForm) {
  GeneratorSpec spec;
  spec.cardinalities = {2, 1};
  spec.pairs.push_back({0, 1, {0.05, 0.95}});
  spec.n_test = 20000;
  // Positives sit in the high cell with probability 0.95, negatives with 0.05:
  // AUC = 0.95 * 0.95 + 0.5 * (0.95 * 0.05 + 0.05 * 0.95) = 0.95.
  const double closed_form = 0.95 * 0.95 + 0.5 * 2.0 * 0.95 * 0.05;
  EXPECT_NEAR(bayes_auc(generate(spec).test), closed_form, 0.005);
}

TEST(BayesAuc, RowCountMismatchIsAnError) {
  testing::TempDir dir("bayesrows");
  GeneratorSpec spec = two_field(3);
  spec.n_valid = 150;
  write_dataset(generate(spec), dir.path());
  EXPECT_THROW(bayes_auc(dir / "oracle.csv", dir / "valid.csv"), Error);
  testing::write_text(dir / "short.csv", "bayes_p\n0.5\n");
  try {
    bayes_auc(dir / "short.csv", dir / "test.csv");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("1 rows"), std::string::npos) << e.what();
  }
}

}  // namespace
}  // namespace memonet
