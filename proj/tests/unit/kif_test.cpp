#include <gtest/gtest.h>

#include <random>
#include <set>

#include "memonet/kif.hpp"
#include "model_support.hpp"

namespace memonet {
namespace {

Schema categorical_schema(std::size_t fields) {
  std::string text;
  for (std::size_t i = 0; i < fields; ++i) text += "f" + std::to_string(i) + ",categorical," + std::to_string(i) + "\n";
  return Schema::parse(text + "label=label\n");
}

TEST(Fnr, CountsDistinctFeaturesPerField) {
  const Schema schema = categorical_schema(2);
  Vocabulary vocab;
  for (int i = 0; i < 7; ++i) vocab.add("1_" + std::to_string(i), 1);
  for (int i = 0; i < 3; ++i) vocab.add("0_" + std::to_string(i), 0);
  const auto report = fnr_scores(vocab, schema);
  ASSERT_EQ(report.fields.size(), 2u);
  EXPECT_EQ(report.fields[0].field, 1u);
  EXPECT_EQ(report.fields[0].score, 7.0);
  EXPECT_EQ(report.fields[0].rank, 1u);
  EXPECT_EQ(report.fields[1].field, 0u);
  EXPECT_EQ(report.fields[1].score, 3.0);
  EXPECT_EQ(select_kif(report, 1), (std::vector<std::size_t>{1}));
}

TEST(Fnr, NumericFieldCountsTruncatedValues) {
  testing::TempDir dir("fnrnum");
  testing::write_text(dir / "d.csv", "a,x,y\n1.0000001,p,1\n1.0000004,q,0\n2.5,p,1\n");
  const Schema schema = Schema::parse("a,numerical,0\nx,categorical,1\nlabel=y\n");
  const auto ingested = ingest(dir / "d.csv", schema);
  const auto report = fnr_scores(ingested.vocabulary, schema);
  for (const auto& f : report.fields) EXPECT_EQ(f.score, 2.0) << f.name;
  // Equal scores fall back to ascending field index.
  EXPECT_EQ(report.fields[0].field, 0u);
}

TEST(Fnr, MatchesBruteForceDistinctCount) {
  testing::TempDir dir("fnrgen");
  GeneratorSpec spec;
  spec.cardinalities = {3, 40, 9, 17};
  spec.n_train = 300;
  spec.n_valid = 5;
  spec.n_test = 5;
  const auto data = testing::load_synthetic(spec, dir.path());
  std::vector<std::set<std::string>> distinct(4);
  for (const auto& inst : data.train.instances) {
    for (std::size_t f = 0; f < 4; ++f) distinct[f].insert(inst.raw[f]);
  }
  const auto report = fnr_scores(data.vocabulary, data.schema);
  for (const auto& f : report.fields) EXPECT_EQ(f.score, static_cast<double>(distinct[f.field].size()));
}

TEST(Far, DirectSummationExample) {
  const Tensor attention = Tensor::from_rows({{1, 2, 3, 4, 5, 6}});
  const auto pairs = enumerate_pairs(3, std::nullopt);
  EXPECT_EQ(accumulate_field_attention(attention, 3, pairs), (std::vector<double>{3, 7, 11}));
  const Tensor empty(0, 6);
  EXPECT_EQ(accumulate_field_attention(empty, 3, pairs), (std::vector<double>{0, 0, 0}));
  EXPECT_THROW(accumulate_field_attention(Tensor(1, 5), 3, pairs), Error);
}

TEST(Far, KifRestrictsToGeneratedPairs) {
  const Tensor attention = Tensor::from_rows({{1, 2, 3, 4, 5, 6}});
  // KIF {0}: pairs (0,1) and (0,2); the (1,2) and (2,1) directions are ignored.
  const auto pairs = enumerate_pairs(3, std::vector<std::size_t>{0});
  EXPECT_EQ(accumulate_field_attention(attention, 3, pairs), (std::vector<double>{3, 3, 5}));
}

TEST(Far, SignedScoresAndRanking) {
  const Schema schema = categorical_schema(3);
  const auto report = rank_fields(KifMethod::kFar, schema, std::vector<double>{-2.0, 0.5, 0.5});
  EXPECT_EQ(report.fields[0].field, 1u);
  EXPECT_EQ(report.fields[1].field, 2u);
  EXPECT_EQ(report.fields[2].field, 0u);
  EXPECT_EQ(report.fields[2].score, -2.0);
  EXPECT_THROW(rank_fields(KifMethod::kFar, schema, std::vector<double>{1.0}), Error);
}

struct FarFixture {
  testing::TempDir dir{"far"};
  cli::LoadedData data;
  TrainConfig config;
  Model model;

  FarFixture() {
    GeneratorSpec spec;
    spec.cardinalities = {6, 6, 6, 6};
    spec.pairs.push_back({0, 1, {}});
    spec.n_train = 300;
    spec.n_valid = 200;
    spec.n_test = 5;
    data = testing::load_synthetic(spec, dir.path());
    config.d = 3;
    config.n_codewords = 50;
    config.s = 4;
    config.mlp = {6};
    model = Model(config, 4, data.vocabulary.size());
    model.initialize(9);
  }
};

TEST(Far, AdditiveOverShards) {
  FarFixture fx;
  const auto valid = encode(fx.data.valid, fx.config);
  const auto whole = far_accumulate(fx.model, valid);
  auto part = [&](std::size_t begin, std::size_t end) {
    EncodedDataset d = valid;
    const Batch b = valid.range(begin, end);
    d.vocab = b.vocab;
    d.labels = b.labels;
    d.addresses.clear();
    for (std::size_t r = begin; r < end; ++r) {
      const std::size_t stride = valid.num_pairs * valid.m;
      d.addresses.insert(d.addresses.end(), valid.addresses.begin() + r * stride,
                         valid.addresses.begin() + (r + 1) * stride);
    }
    return far_accumulate(fx.model, d);
  };
  const auto a = part(0, 77);
  const auto b = part(77, 200);
  for (std::size_t f = 0; f < 4; ++f) EXPECT_NEAR(whole[f], a[f] + b[f], 1e-10);
  EXPECT_EQ(far_accumulate(fx.model, valid, 13), far_accumulate(fx.model, valid, 13));
  for (std::size_t f = 0; f < 4; ++f) EXPECT_NEAR(far_accumulate(fx.model, valid, 13)[f], whole[f], 1e-10);
}

TEST(Far, EmptyValidationSetScoresZero) {
  FarFixture fx;
  EncodedDataset empty = encode(fx.data.valid, fx.config);
  empty.vocab.clear();
  empty.addresses.clear();
  empty.labels.clear();
  EXPECT_EQ(far_accumulate(fx.model, empty), (std::vector<double>{0, 0, 0, 0}));
}

TEST(Far, RequiresHcnet) {
  FarFixture fx;
  TrainConfig dnn_cfg = fx.config;
  dnn_cfg.mode = ModelMode::kDnn;
  Model dnn(dnn_cfg, 4, fx.data.vocabulary.size());
  EXPECT_THROW(far_scores(dnn, encode(fx.data.valid, dnn_cfg), fx.data.schema), Error);
}

TEST(SelectKif, RangeAndScaleInvariance) {
  const Schema schema = categorical_schema(4);
  const std::vector<double> scores{0.3, -1.0, 2.0, 0.7};
  const auto report = rank_fields(KifMethod::kFar, schema, scores);
  EXPECT_EQ(select_kif(report, 2), (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(select_kif(report, 4), (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_THROW(select_kif(report, 0), Error);
  EXPECT_THROW(select_kif(report, 5), Error);
  std::vector<double> scaled;
  for (double s : scores) scaled.push_back(s * 37.5);
  const auto rescaled = rank_fields(KifMethod::kFar, schema, scaled);
  for (std::size_t k = 1; k <= 4; ++k) EXPECT_EQ(select_kif(rescaled, k), select_kif(report, k));
  EXPECT_EQ(enumerate_pairs(4, select_kif(report, 1)).size(), 3u);
}

TEST(SelectKif, FullSetGivesTheNoKifModel) {
  FarFixture fx;
  TrainConfig with_kif = fx.config;
  with_kif.kif = std::vector<std::size_t>{0, 1, 2, 3};
  Model a(with_kif, 4, fx.data.vocabulary.size());
  a.initialize(9);
  EXPECT_EQ(a.pairs(), fx.model.pairs());
  const auto ea = encode(fx.data.valid, with_kif);
  const auto eb = encode(fx.data.valid, fx.config);
  EXPECT_EQ(ea.addresses, eb.addresses);
  EXPECT_EQ(predict(a, ea), predict(fx.model, eb));
}

TEST(KifReport, JsonAndTable) {
  const Schema schema = categorical_schema(2);
  const auto report = rank_fields(KifMethod::kFnr, schema, std::vector<double>{1.0, 4.0});
  const std::string json = report.to_json();
  EXPECT_NE(json.find("\"fnr\""), std::string::npos) << json;
  EXPECT_NE(report.to_table().find("f1"), std::string::npos);
  EXPECT_EQ(parse_kif_method("far"), KifMethod::kFar);
  EXPECT_THROW(parse_kif_method("rank"), Error);
}

}  // namespace
}  // namespace memonet
