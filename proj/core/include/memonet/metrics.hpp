#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "memonet/model.hpp"

namespace memonet {

/// Mann-Whitney AUC with half credit for ties, by sort-and-rank.
/// Labels are 0/1; both classes must be present.
double auc(std::span<const double> labels, std::span<const double> scores);

struct EvalResult {
  double auc = 0.0;  // NaN when one class is absent
  double logloss = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;

  std::string to_json() const;
};

EvalResult evaluate_predictions(std::span<const double> labels, std::span<const double> predictions);

/// Forward pass over frozen parameters. Rows are independent, so any
/// sharding (`threads` > 1) gives bit-identical predictions.
std::vector<double> predict(const Model& model, const EncodedDataset& data, std::size_t threads = 1,
                            std::size_t shard_rows = 4096);

EvalResult evaluate(const Model& model, const EncodedDataset& data, std::size_t threads = 1);

}  // namespace memonet
