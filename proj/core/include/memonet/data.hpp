#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace memonet {

enum class FieldKind { kCategorical, kNumerical };

std::string_view to_string(FieldKind kind);
FieldKind parse_field_kind(std::string_view text);

struct FieldSpec {
  std::string name;
  std::size_t index = 0;
  FieldKind kind = FieldKind::kCategorical;

  friend bool operator==(const FieldSpec&, const FieldSpec&) = default;
};

/// Field declarations plus the label column. Fields are kept sorted by
/// field index; declaration order in the schema file is irrelevant.
class Schema {
 public:
  static constexpr int kDefaultDecimalPlaces = 5;

  Schema() = default;
  Schema(std::vector<FieldSpec> fields, std::string label_column,
         int decimal_places = kDefaultDecimalPlaces);

  /// Parses the line-oriented schema format:
  ///   name,kind[,index]   one per field, kind in {categorical, numerical}
  ///   label=<column>
  ///   k=<decimal places>
  /// Blank lines and lines starting with '#' are ignored.
  static Schema parse(std::string_view text);
  static Schema load(const std::filesystem::path& path);
  std::string to_text() const;

  std::size_t num_fields() const { return fields_.size(); }
  const std::vector<FieldSpec>& fields() const { return fields_; }
  const FieldSpec& field(std::size_t index) const { return fields_.at(index); }
  const std::string& label_column() const { return label_; }
  int decimal_places() const { return decimal_places_; }

  friend bool operator==(const Schema&, const Schema&) = default;

 private:
  std::vector<FieldSpec> fields_;
  std::string label_;
  int decimal_places_ = kDefaultDecimalPlaces;
};

/// Percent-escapes '%', '_' and '|' so raw values cannot forge delimiters.
std::string escape_raw_value(std::string_view raw);

/// Fixed-point rendering of `value` truncated toward zero to exactly `k`
/// decimals. Truncation is applied to the shortest round-trip decimal form,
/// so "0.29" stays 0.29 rather than 0.28999.
std::string truncate_decimal(double value, int k);

std::string feature_id(const FieldSpec& field, std::string_view raw_value, int k);
std::string numeric_feature_id(std::size_t field_index, double value, int k);

/// Joins two feature IDs with '|', lower field index first.
std::string cross_id(std::string_view id_i, std::size_t field_i, std::string_view id_j,
                     std::size_t field_j);

struct FieldPair {
  std::size_t lo = 0;
  std::size_t hi = 0;
  friend bool operator==(const FieldPair&, const FieldPair&) = default;
};

/// Unordered field pairs to cross, ascending (lo, hi). Without a KIF set
/// this is all f(f-1)/2 pairs; with one, the pairs touching at least one
/// key field.
std::vector<FieldPair> enumerate_pairs(std::size_t num_fields,
                                       const std::optional<std::vector<std::size_t>>& kif);

struct Instance {
  std::vector<std::string> raw;
  std::vector<std::string> feature_ids;
  std::vector<std::uint32_t> vocab_indices;
  int label = 0;
};

struct Cross {
  std::size_t i = 0;
  std::size_t j = 0;
  std::string id;
};

std::vector<Cross> enumerate_crosses(const Instance& instance,
                                     const std::optional<std::vector<std::size_t>>& kif);

/// Feature ID -> dense index. Index 0 is reserved for out-of-vocabulary.
class Vocabulary {
 public:
  static constexpr std::uint32_t kOov = 0;

  Vocabulary();

  std::uint32_t add(const std::string& feature_id, std::size_t field);
  std::uint32_t lookup(const std::string& feature_id) const;
  std::size_t size() const { return ids_.size(); }
  const std::string& id_at(std::uint32_t index) const { return ids_.at(index); }
  /// Field owning an entry; meaningless for the OOV slot.
  std::size_t field_at(std::uint32_t index) const { return fields_.at(index); }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.ids_ == b.ids_ && a.fields_ == b.fields_;
  }

 private:
  std::vector<std::string> ids_;
  std::vector<std::size_t> fields_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

struct Dataset {
  Schema schema;
  std::vector<Instance> instances;

  std::size_t size() const { return instances.size(); }
};

struct IngestResult {
  Dataset dataset;
  Vocabulary vocabulary;
};

/// Reads a headered CSV, builds the vocabulary in row-major ingestion order.
IngestResult ingest(const std::filesystem::path& path, const Schema& schema);
/// Reads a CSV against a frozen vocabulary; unseen features map to OOV.
Dataset ingest_with_vocabulary(const std::filesystem::path& path, const Schema& schema,
                               const Vocabulary& vocabulary);

/// Splits one CSV record, honoring double-quoted fields.
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace memonet
