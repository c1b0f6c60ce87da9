#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "memonet/data.hpp"
#include "memonet/model.hpp"

namespace memonet {

enum class KifMethod { kFnr, kFar };

std::string_view to_string(KifMethod method);
KifMethod parse_kif_method(std::string_view text);

struct FieldScore {
  std::size_t field = 0;
  std::string name;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based
};

/// Fields sorted by descending score, ties broken by ascending field index.
struct FieldScoreReport {
  KifMethod method = KifMethod::kFnr;
  std::vector<FieldScore> fields;

  std::string to_json() const;
  std::string to_table() const;
};

FieldScoreReport rank_fields(KifMethod method, const Schema& schema, std::span<const double> scores);

/// Feature-number ranking: distinct feature IDs per field, OOV excluded.
FieldScoreReport fnr_scores(const Vocabulary& vocabulary, const Schema& schema);

/// Adds every GAS score a_(k,j) of each attention row into field k's
/// accumulator (signed). `pairs` restricts accumulation to generated
/// crosses; pass all pairs for a full HCNet.
std::vector<double> accumulate_field_attention(const Tensor& attention, std::size_t num_fields,
                                               std::span<const FieldPair> pairs);

/// Field-attention ranking over a validation set with a trained MemoNet.
std::vector<double> far_accumulate(const Model& model, const EncodedDataset& data,
                                   std::size_t shard_rows = 4096);
FieldScoreReport far_scores(const Model& model, const EncodedDataset& data, const Schema& schema);

/// The `top_k` highest-ranked field indices, ascending.
std::vector<std::size_t> select_kif(const FieldScoreReport& report, std::size_t top_k);

}  // namespace memonet
