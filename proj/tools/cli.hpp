#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "memonet/data.hpp"
#include "memonet/metrics.hpp"
#include "memonet/model.hpp"
#include "memonet/synthetic.hpp"

namespace memonet::cli {

/// key=value settings routed to the training config, the generator spec, or
/// the data/out paths. `seed` applies to both the trainer and the generator.
struct RunConfig {
  TrainConfig train;
  GeneratorSpec generator;
  std::optional<std::filesystem::path> data;
  std::optional<std::filesystem::path> out;

  void set(std::string_view key, std::string_view value);
  /// Applies every non-comment line of `text`; errors name `source` and the line.
  void apply(std::string_view text, const std::string& source);
  static RunConfig load(const std::filesystem::path& path);
};

/// A data directory ingested once: vocabulary from train.csv, the other
/// splits mapped through it.
struct LoadedData {
  Schema schema;
  Vocabulary vocabulary;
  Dataset train;
  Dataset valid;
  std::optional<Dataset> test;
};

LoadedData load_data_dir(const std::filesystem::path& dir);

struct TrainOutcome {
  FitResult fit;
  std::optional<EvalResult> test;
};

/// Trains, writes checkpoint.bin, history.jsonl, config.resolved.txt (and
/// test_metrics.json when a test split exists) into `out_dir`.
TrainOutcome train_run(const TrainConfig& config, const LoadedData& data, const std::filesystem::path& out_dir,
                       bool force, std::ostream& log);

/// Entry point; returns the process exit status.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace memonet::cli
