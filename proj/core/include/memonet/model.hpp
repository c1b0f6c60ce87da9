#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "memonet/codebook.hpp"
#include "memonet/data.hpp"
#include "memonet/hcnet.hpp"
#include "memonet/tensor.hpp"

namespace memonet {

enum class ModelMode { kDnn, kMemoNet };

std::string_view to_string(ModelMode mode);
ModelMode parse_model_mode(std::string_view text);

inline constexpr double kMinProbability = 1e-7;
inline constexpr double kMaxProbability = 1.0 - 1e-7;

/// Hyperparameters. Defaults: Adam, batch 1024, 3x400 ReLU MLP, 2 hash
/// functions, 1M codewords, codeword width = embedding width.
struct TrainConfig {
  ModelMode mode = ModelMode::kMemoNet;
  RestoreMode restore = RestoreMode::kLinear;
  std::size_t d = 10;
  std::size_t l = 0;  // 0: same as d
  std::size_t n_codewords = 1'000'000;
  unsigned m_hash = 2;
  std::size_t s = 64;
  int k_decimals = Schema::kDefaultDecimalPlaces;
  std::vector<std::size_t> mlp = {400, 400, 400};
  std::optional<std::vector<std::size_t>> kif;
  double learning_rate = 1e-3;
  std::size_t batch_size = 1024;
  std::size_t epochs = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 1;
  std::uint64_t hash_seed = 0;

  std::size_t codeword_width() const { return l == 0 ? d : l; }
  void validate() const;

  /// Sets one `key=value` entry; unknown keys and bad values throw.
  void set(std::string_view key, std::string_view value);
  static bool is_key(std::string_view key);
  /// Every key with its resolved value, one `key=value` per line.
  std::string to_text() const;
  static TrainConfig parse(std::string_view text);

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// One fully connected ReLU layer, x * weight + bias.
struct DenseLayer {
  Parameter weight;
  Parameter bias;
};

/// Rows gathered for one optimizer step or evaluation shard.
struct Batch {
  std::size_t size = 0;
  std::vector<std::uint32_t> vocab;      // size x f
  std::vector<std::uint32_t> addresses;  // pair-major, see HcnetBatch
  std::vector<double> labels;
};

/// The DNN backbone, optionally with a 2-order HCNet (MemoNet).
class Model {
 public:
  Model() = default;
  /// All parameters zero; call initialize() for the random init.
  Model(const TrainConfig& config, std::size_t num_fields, std::size_t vocab_size);

  void initialize(std::uint64_t seed);

  const TrainConfig& config() const { return config_; }
  std::size_t num_fields() const { return num_fields_; }
  std::size_t vocab_size() const { return embedding.value.rows(); }
  std::size_t input_width() const;
  bool has_hcnet() const { return codebook.has_value(); }
  const std::vector<FieldPair>& pairs() const { return pairs_; }

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

  struct Vars {
    Var embedding;
    Var codebook;
    std::optional<HcnetVars> hcnet;
    std::vector<std::pair<Var, Var>> mlp;
    Var pred_w;
    Var pred_b;
  };
  Vars bind(Tape& tape);
  /// Binding for inference over frozen parameters; backward through it throws.
  Vars bind_frozen(Tape& tape) const;

  struct Forward {
    Var v;                         // B x fd
    std::optional<Var> v2;         // B x fd, MemoNet only
    std::optional<Var> attention;  // B x f(f-1), MemoNet only
    Var logits;                    // B x 1
    Var probability;               // B x 1, clamped
  };
  Forward forward(const Vars& vars, const Batch& batch) const;

  Parameter embedding;
  std::optional<Codebook> codebook;
  std::optional<HcnetParams> hcnet;
  std::vector<DenseLayer> mlp;
  Parameter pred_w;
  Parameter pred_b;

 private:
  TrainConfig config_;
  std::size_t num_fields_ = 0;
  std::vector<FieldPair> pairs_;
};

/// Vocabulary indices, labels and precomputed codeword addresses of a dataset.
struct EncodedDataset {
  std::size_t num_fields = 0;
  std::size_t num_pairs = 0;
  unsigned m = 0;
  std::vector<std::uint32_t> vocab;      // N x f
  std::vector<std::uint32_t> addresses;  // N x P x m
  std::vector<double> labels;

  std::size_t size() const { return labels.size(); }
  Batch batch(std::span<const std::size_t> rows) const;
  Batch range(std::size_t begin, std::size_t end) const;
};

/// Addresses depend only on the config's mode, KIF set and codebook
/// addressing parameters (n, m, hash seed).
EncodedDataset encode(const Dataset& dataset, const TrainConfig& config);

/// Embedding lookups for a batch: per-field B x d tensors and their B x fd concatenation.
struct Embedded {
  std::vector<Var> fields;
  Var v;
};
Embedded embed_instance(Var table, std::span<const std::uint32_t> vocab_indices,
                        std::size_t num_fields);

/// Mean binary cross-entropy after clamping predictions into
/// [kMinProbability, kMaxProbability].
double logloss(std::span<const double> labels, std::span<const double> predictions);

struct AdamState {
  std::vector<Tensor> first;
  std::vector<Tensor> second;
  std::uint64_t timestep = 0;

  static AdamState for_model(const Model& model);
};

/// Bias-corrected Adam. Row-sparse parameters only update rows that
/// received gradient this step; all other rows and their moments are left
/// exactly as they were.
void adam_update(std::span<Parameter* const> params, AdamState& state, const TrainConfig& config);

/// One forward/backward/update over `batch`; returns the mean batch logloss.
double train_step(Model& model, AdamState& adam, const Batch& batch);

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_logloss = 0.0;
  double valid_logloss = 0.0;
  double valid_auc = 0.0;
  double seconds = 0.0;

  std::string to_json() const;
  /// Equality of everything except wall-clock time.
  bool same_metrics(const EpochMetrics& other) const;
};

struct FitResult {
  Model best;
  std::vector<EpochMetrics> history;
  std::size_t best_epoch = 0;
  double best_valid_auc = 0.0;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Seeded shuffling per epoch, validation after every epoch, keeps the
/// parameters with the best validation AUC.
FitResult fit(Model model, const EncodedDataset& train, const EncodedDataset& valid,
              const EpochCallback& on_epoch = {});

/// Convenience: builds, initializes and fits a model from config.
FitResult fit(const TrainConfig& config, std::size_t num_fields, std::size_t vocab_size,
              const EncodedDataset& train, const EncodedDataset& valid,
              const EpochCallback& on_epoch = {});

}  // namespace memonet
