#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "memonet/data.hpp"
#include "memonet/tensor.hpp"
#include "test_support.hpp"

namespace memonet {
namespace {

using testing::TempDir;
using testing::write_text;

Schema cat_num_schema() { return Schema::parse("color,categorical\nprice,numerical\nlabel=clicked\n"); }

TEST(Schema, ParsesFieldsLabelAndK) {
  const Schema s = Schema::parse("# comment\nb,numerical,1\na,categorical,0\n\nlabel=y\nk=3\n");
  ASSERT_EQ(s.num_fields(), 2u);
  EXPECT_EQ(s.field(0).name, "a");
  EXPECT_EQ(s.field(1).kind, FieldKind::kNumerical);
  EXPECT_EQ(s.label_column(), "y");
  EXPECT_EQ(s.decimal_places(), 3);
  EXPECT_EQ(Schema::parse(s.to_text()), s);
}

TEST(Schema, DefaultsToFiveDecimals) {
  EXPECT_EQ(cat_num_schema().decimal_places(), 5);
}

TEST(Schema, RejectsInvalidDeclarations) {
  EXPECT_THROW(Schema::parse("a,categorical\nlabel=y\n"), Error);                           // f < 2
  EXPECT_THROW(Schema::parse("a,categorical\nb,categorical\n"), Error);                     // no label
  EXPECT_THROW(Schema::parse("a,categorical\nb,boolean\nlabel=y\n"), Error);                // kind
  EXPECT_THROW(Schema::parse("a,categorical,0\nb,categorical,2\nlabel=y\n"), Error);        // gap
  EXPECT_THROW(Schema::parse("a,categorical\na,categorical\nlabel=y\n"), Error);            // dup name
  EXPECT_THROW(Schema::parse("a,categorical\nb,categorical\nlabel=y\nlabel=z\n"), Error);   // two labels
  EXPECT_THROW(Schema::parse("a,categorical\nb,categorical\nlabel=a\n"), Error);            // label is field
}

TEST(Schema, ErrorsNameTheLine) {
  try {
    Schema::parse("a,categorical\nnonsense\nlabel=y\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(FeatureId, CategoricalAndNumerical) {
  EXPECT_EQ(feature_id({"fruit", 3, FieldKind::kCategorical}, "apple", 5), "3_apple");
  EXPECT_EQ(feature_id({"x", 7, FieldKind::kNumerical}, "3.1415926", 5), "7_3.14159");
  EXPECT_EQ(feature_id({"x", 7, FieldKind::kNumerical}, "-0.5", 5), "7_-0.50000");
}

TEST(FeatureId, TruncatesTowardZeroWithoutBinaryArtifacts) {
  EXPECT_EQ(truncate_decimal(0.29, 2), "0.29");
  EXPECT_EQ(truncate_decimal(2.999999, 5), "2.99999");
  EXPECT_EQ(truncate_decimal(-2.999999, 5), "-2.99999");
  EXPECT_EQ(truncate_decimal(12.0, 0), "12");
  EXPECT_EQ(truncate_decimal(-0.000001, 5), "0.00000");
  EXPECT_EQ(truncate_decimal(1e-7, 5), "0.00000");
  EXPECT_EQ(truncate_decimal(123456.5, 1), "123456.5");
}

TEST(FeatureId, RejectsNonFiniteNumbers) {
  EXPECT_THROW(truncate_decimal(std::numeric_limits<double>::quiet_NaN(), 5), Error);
  EXPECT_THROW(truncate_decimal(std::numeric_limits<double>::infinity(), 5), Error);
  EXPECT_THROW(feature_id({"x", 0, FieldKind::kNumerical}, "nan", 5), Error);
  EXPECT_THROW(feature_id({"x", 0, FieldKind::kNumerical}, "abc", 5), Error);
}

TEST(FeatureId, NumericalValuesSharingATruncationShareAnId) {
  EXPECT_EQ(numeric_feature_id(2, 0.123456, 5), numeric_feature_id(2, 0.123459, 5));
  EXPECT_NE(numeric_feature_id(2, 0.12345, 5), numeric_feature_id(2, 0.12346, 5));
}

TEST(FeatureId, EscapingKeepsIdsInjective) {
  EXPECT_EQ(escape_raw_value("a_b|c%d"), "a%5Fb%7Cc%25d");
  const FieldSpec f0{"a", 0, FieldKind::kCategorical};
  const FieldSpec f1{"b", 1, FieldKind::kCategorical};
  // Without escaping these two crosses would both read "0_x|1_y|z".
  const auto c1 = cross_id(feature_id(f0, "x", 5), 0, feature_id(f1, "y|z", 5), 1);
  const auto c2 = cross_id(feature_id(f0, "x|1_y", 5), 0, feature_id(f1, "z", 5), 1);
  EXPECT_NE(c1, c2);
  // Field-index prefixes separate equal raw values.
  EXPECT_NE(feature_id(f0, "12", 5), feature_id(f1, "12", 5));
  EXPECT_NE(feature_id({"c", 1, FieldKind::kCategorical}, "23", 5), feature_id({"d", 12, FieldKind::kCategorical}, "3", 5));
}

TEST(CrossId, OrdersByFieldIndex) {
  EXPECT_EQ(cross_id("3_a", 3, "7_b", 7), "3_a|7_b");
  EXPECT_EQ(cross_id("7_b", 7, "3_a", 3), "3_a|7_b");
  EXPECT_EQ(cross_id("0_x", 0, "1_y", 1), "0_x|1_y");
  EXPECT_THROW(cross_id("1_a", 1, "1_b", 1), Error);
}

TEST(CrossId, SymmetricOverRandomInputs) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const std::size_t fi = rng() % 20, fj = (fi + 1 + rng() % 19) % 20;
    const std::string a = std::to_string(fi) + "_" + std::to_string(rng() % 1000);
    const std::string b = std::to_string(fj) + "_" + std::to_string(rng() % 1000);
    EXPECT_EQ(cross_id(a, fi, b, fj), cross_id(b, fj, a, fi));
  }
}

TEST(Pairs, EnumerationCounts) {
  EXPECT_EQ(enumerate_pairs(4, std::nullopt).size(), 6u);
  const auto k0 = enumerate_pairs(4, std::vector<std::size_t>{0});
  EXPECT_EQ(k0, (std::vector<FieldPair>{{0, 1}, {0, 2}, {0, 3}}));
  EXPECT_EQ(enumerate_pairs(4, std::vector<std::size_t>{0, 1}).size(), 5u);
  EXPECT_EQ(enumerate_pairs(4, std::vector<std::size_t>{0, 1, 2, 3}), enumerate_pairs(4, std::nullopt));
  EXPECT_THROW(enumerate_pairs(4, std::vector<std::size_t>{}), Error);
  EXPECT_THROW(enumerate_pairs(4, std::vector<std::size_t>{4}), Error);
  for (std::size_t f = 2; f < 12; ++f) EXPECT_EQ(enumerate_pairs(f, std::nullopt).size(), f * (f - 1) / 2);
}

TEST(Pairs, CrossesOfAnInstance) {
  Instance inst;
  inst.feature_ids = {"0_a", "1_b", "2_c"};
  const auto all = enumerate_crosses(inst, std::nullopt);
  ASSERT_EQ(all.size(), 3u);
  EXPECT_EQ(all[0].id, "0_a|1_b");
  EXPECT_EQ(all[2].id, "1_b|2_c");
  const auto k = enumerate_crosses(inst, std::vector<std::size_t>{2});
  ASSERT_EQ(k.size(), 2u);
  EXPECT_EQ(k[0].id, "0_a|2_c");
  EXPECT_EQ(k[1].id, "1_b|2_c");
}

TEST(Vocabulary, ReservesOovAndIsBijective) {
  Vocabulary v;
  EXPECT_EQ(v.size(), 1u);
  EXPECT_EQ(v.add("0_a", 0), 1u);
  EXPECT_EQ(v.add("1_b", 1), 2u);
  EXPECT_EQ(v.add("0_a", 0), 1u);
  EXPECT_EQ(v.lookup("1_b"), 2u);
  EXPECT_EQ(v.lookup("9_zz"), Vocabulary::kOov);
  EXPECT_EQ(v.id_at(2), "1_b");
  EXPECT_EQ(v.field_at(2), 1u);
}

TEST(Ingest, TwoRowFile) {
  TempDir dir("ingest");
  write_text(dir / "d.csv", "color,price,clicked\nred,1.5,1\nblue,1.5,0\n");
  const auto r = ingest(dir / "d.csv", cat_num_schema());
  ASSERT_EQ(r.dataset.size(), 2u);
  EXPECT_EQ(r.vocabulary.size(), 3u + 1u);  // 0_red, 0_blue, 1_1.50000 + OOV
  EXPECT_EQ(r.dataset.instances[0].feature_ids[1], "1_1.50000");
  EXPECT_EQ(r.dataset.instances[0].label, 1);
  EXPECT_EQ(r.dataset.instances[1].vocab_indices, (std::vector<std::uint32_t>{3, 2}));
}

TEST(Ingest, IsDeterministic) {
  TempDir dir("ingest");
  write_text(dir / "d.csv", "price,color,clicked\n2,a,1\n3,b,0\n2,c,1\n");
  const auto a = ingest(dir / "d.csv", cat_num_schema());
  const auto b = ingest(dir / "d.csv", cat_num_schema());
  EXPECT_EQ(a.vocabulary, b.vocabulary);
  ASSERT_EQ(a.dataset.size(), b.dataset.size());
  for (std::size_t i = 0; i < a.dataset.size(); ++i) {
    EXPECT_EQ(a.dataset.instances[i].vocab_indices, b.dataset.instances[i].vocab_indices);
  }
}

TEST(Ingest, UnseenValuesMapToOov) {
  TempDir dir("ingest");
  write_text(dir / "train.csv", "color,price,clicked\nred,1,1\nblue,2,0\n");
  write_text(dir / "eval.csv", "color,price,clicked\ngreen,1,1\n");
  const auto r = ingest(dir / "train.csv", cat_num_schema());
  const Dataset eval = ingest_with_vocabulary(dir / "eval.csv", cat_num_schema(), r.vocabulary);
  ASSERT_EQ(eval.size(), 1u);
  EXPECT_EQ(eval.instances[0].vocab_indices[0], Vocabulary::kOov);
  EXPECT_NE(eval.instances[0].vocab_indices[1], Vocabulary::kOov);
}

TEST(Ingest, QuotedCellsAndEmptyCategories) {
  TempDir dir("ingest");
  write_text(dir / "d.csv", "color,price,clicked\n\"dark, red\",1,1\n,2,0\n");
  const auto r = ingest(dir / "d.csv", cat_num_schema());
  EXPECT_EQ(r.dataset.instances[0].feature_ids[0], "0_dark, red");
  EXPECT_EQ(r.dataset.instances[1].feature_ids[0], "0_");
}

TEST(Ingest, ErrorsCarryPathAndLine) {
  TempDir dir("ingest");
  auto expect_error = [&](const std::string& body, const std::string& fragment) {
    write_text(dir / "bad.csv", body);
    try {
      ingest(dir / "bad.csv", cat_num_schema());
      FAIL() << "expected failure for " << body;
    } catch (const Error& e) {
      EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    }
  };
  expect_error("color,clicked\nred,1\n", "missing column 'price'");
  expect_error("color,price,clicked\nred,1,1\nred,abc,0\n", "bad.csv:3");
  expect_error("color,price,clicked\nred,1,2\n", "bad label");
  expect_error("color,price,clicked\nred,1\n", "bad.csv:2");
  EXPECT_THROW(ingest(dir / "missing.csv", cat_num_schema()), Error);
}

TEST(Csv, SplitsQuotedFields) {
  EXPECT_EQ(split_csv_line("a,\"b,c\",d"), (std::vector<std::string>{"a", "b,c", "d"}));
  EXPECT_EQ(split_csv_line("\"x\"\"y\",,"), (std::vector<std::string>{"x\"y", "", ""}));
}

}  // namespace
}  // namespace memonet
