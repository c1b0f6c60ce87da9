#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "memonet/data.hpp"
#include "memonet/model.hpp"

namespace memonet {

inline constexpr char kCheckpointMagic[8] = {'M', 'E', 'M', 'O', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Everything needed to score new data: model, config, schema and vocabulary,
/// plus free-form metadata (e.g. the recorded best validation AUC).
struct Checkpoint {
  TrainConfig config;
  Schema schema;
  Vocabulary vocabulary;
  Model model;
  std::map<std::string, std::string> meta;
};

/// Binary layout, all integers little-endian:
///   magic[8] "MEMOCKPT", u32 version
///   str schema_text, str config_text, str meta_text     (str = u64 length + bytes)
///   u64 vocab_size; per entry after OOV: u64 field, str feature_id
///   u64 tensor_count; per tensor: str name, u32 rank, u64 dims[rank], f64 data[]
void save_checkpoint(const std::filesystem::path& path, const Model& model, const Schema& schema,
                     const Vocabulary& vocabulary, const std::map<std::string, std::string>& meta = {});

/// Loads and validates every tensor shape against the stored config. With
/// `expected`, the stored config's dimensions must also match it.
Checkpoint load_checkpoint(const std::filesystem::path& path, const TrainConfig* expected = nullptr);

}  // namespace memonet
