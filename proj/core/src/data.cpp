#include "memonet/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "memonet/tensor.hpp"

namespace memonet {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

double parse_double(std::string_view text) {
  double v = 0.0;
  text = trim(text);
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error("not a number: '" + std::string(text) + "'");
  }
  return v;
}

struct CsvHeader {
  std::vector<std::size_t> field_columns;  // by field index
  std::size_t label_column = 0;
  std::size_t width = 0;
};

CsvHeader resolve_header(const std::string& line, const Schema& schema,
                         const std::filesystem::path& path) {
  auto names = split_csv_line(line);
  CsvHeader h;
  h.width = names.size();
  auto find = [&](const std::string& name) {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) {
      throw Error(path.string() + ":1: missing column '" + name + "'");
    }
    return static_cast<std::size_t>(it - names.begin());
  };
  for (const auto& f : schema.fields()) h.field_columns.push_back(find(f.name));
  h.label_column = find(schema.label_column());
  return h;
}

template <typename OnInstance>
void read_csv(const std::filesystem::path& path, const Schema& schema, OnInstance&& on_instance) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(path.string() + ": empty file, header expected");
  const CsvHeader header = resolve_header(line, schema, path);
  std::size_t line_no = 1;
  const int k = schema.decimal_places();
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    if (cells.size() != header.width) {
      throw Error(where + "expected " + std::to_string(header.width) + " columns, found " +
                  std::to_string(cells.size()));
    }
    Instance inst;
    const auto label_text = trim(cells[header.label_column]);
    if (label_text == "0") {
      inst.label = 0;
    } else if (label_text == "1") {
      inst.label = 1;
    } else {
      throw Error(where + "bad label '" + std::string(label_text) + "', expected 0 or 1");
    }
    inst.raw.reserve(schema.num_fields());
    inst.feature_ids.reserve(schema.num_fields());
    for (const auto& field : schema.fields()) {
      std::string raw = cells[header.field_columns[field.index]];
      try {
        inst.feature_ids.push_back(feature_id(field, raw, k));
      } catch (const Error& e) {
        throw Error(where + "field '" + field.name + "': " + e.what());
      }
      inst.raw.push_back(std::move(raw));
    }
    on_instance(std::move(inst));
  }
}

}  // namespace

std::string_view to_string(FieldKind kind) {
  return kind == FieldKind::kCategorical ? "categorical" : "numerical";
}

FieldKind parse_field_kind(std::string_view text) {
  if (text == "categorical") return FieldKind::kCategorical;
  if (text == "numerical") return FieldKind::kNumerical;
  throw Error("unknown field kind '" + std::string(text) + "'");
}

Schema::Schema(std::vector<FieldSpec> fields, std::string label_column, int decimal_places)
    : fields_(std::move(fields)), label_(std::move(label_column)), decimal_places_(decimal_places) {
  std::sort(fields_.begin(), fields_.end(),
            [](const FieldSpec& a, const FieldSpec& b) { return a.index < b.index; });
  if (fields_.size() < 2) throw Error("schema: at least 2 fields required");
  if (label_.empty()) throw Error("schema: label column not declared");
  if (decimal_places_ < 0 || decimal_places_ > 17) {
    throw Error("schema: k must be in [0, 17], got " + std::to_string(decimal_places_));
  }
  std::set<std::string> names;
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    if (fields_[i].index != i) {
      throw Error("schema: field indices must be unique and contiguous from 0; field '" +
                  fields_[i].name + "' has index " + std::to_string(fields_[i].index));
    }
    if (!names.insert(fields_[i].name).second) {
      throw Error("schema: duplicate field '" + fields_[i].name + "'");
    }
  }
  if (names.count(label_)) throw Error("schema: label column '" + label_ + "' is also a field");
}

Schema Schema::parse(std::string_view text) {
  std::vector<FieldSpec> fields;
  std::optional<std::string> label;
  int k = kDefaultDecimalPlaces;
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const std::string where = "schema line " + std::to_string(line_no) + ": ";
    if (line.starts_with("label=")) {
      if (label) throw Error(where + "label declared twice");
      label = std::string(trim(line.substr(6)));
      continue;
    }
    if (line.starts_with("k=")) {
      auto v = trim(line.substr(2));
      auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), k);
      if (ec != std::errc() || p != v.data() + v.size()) throw Error(where + "bad k '" + std::string(v) + "'");
      continue;
    }
    auto parts = split_csv_line(line);
    if (parts.size() != 2 && parts.size() != 3) {
      throw Error(where + "expected 'name,kind[,index]', got '" + std::string(line) + "'");
    }
    FieldSpec f;
    f.name = std::string(trim(parts[0]));
    try {
      f.kind = parse_field_kind(trim(parts[1]));
    } catch (const Error& e) {
      throw Error(where + e.what());
    }
    f.index = fields.size();
    if (parts.size() == 3) {
      auto v = trim(parts[2]);
      auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), f.index);
      if (ec != std::errc() || p != v.data() + v.size()) throw Error(where + "bad index '" + std::string(v) + "'");
    }
    fields.push_back(std::move(f));
  }
  if (!label) throw Error("schema: missing label=<column> entry");
  return Schema(std::move(fields), *label, k);
}

Schema Schema::load(const std::filesystem::path& path) { return parse(read_file(path)); }

std::string Schema::to_text() const {
  std::ostringstream os;
  for (const auto& f : fields_) os << f.name << ',' << to_string(f.kind) << ',' << f.index << '\n';
  os << "label=" << label_ << '\n' << "k=" << decimal_places_ << '\n';
  return os.str();
}

std::string escape_raw_value(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (char c : raw) {
    switch (c) {
      case '%': out += "%25"; break;
      case '_': out += "%5F"; break;
      case '|': out += "%7C"; break;
      default: out += c;
    }
  }
  return out;
}

std::string truncate_decimal(double value, int k) {
  if (!std::isfinite(value)) throw Error("numerical value is not finite");
  char buf[512];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed);
  if (ec != std::errc()) throw Error("cannot render numerical value");
  std::string_view text(buf, static_cast<std::size_t>(end - buf));
  bool negative = false;
  if (!text.empty() && text.front() == '-') {
    negative = true;
    text.remove_prefix(1);
  }
  auto dot = text.find('.');
  std::string_view int_part = text.substr(0, dot);
  std::string_view frac = dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
  std::string digits(frac.substr(0, std::min<std::size_t>(frac.size(), static_cast<std::size_t>(k))));
  digits.resize(static_cast<std::size_t>(k), '0');
  const bool is_zero = std::all_of(int_part.begin(), int_part.end(), [](char c) { return c == '0'; }) &&
                       std::all_of(digits.begin(), digits.end(), [](char c) { return c == '0'; });
  std::string out;
  if (negative && !is_zero) out += '-';
  out += int_part;
  if (k > 0) {
    out += '.';
    out += digits;
  }
  return out;
}

std::string numeric_feature_id(std::size_t field_index, double value, int k) {
  return std::to_string(field_index) + "_" + truncate_decimal(value, k);
}

std::string feature_id(const FieldSpec& field, std::string_view raw_value, int k) {
  if (field.kind == FieldKind::kNumerical) {
    return numeric_feature_id(field.index, parse_double(raw_value), k);
  }
  return std::to_string(field.index) + "_" + escape_raw_value(raw_value);
}

std::string cross_id(std::string_view id_i, std::size_t field_i, std::string_view id_j,
                     std::size_t field_j) {
  if (field_i == field_j) {
    throw Error("cross_id: cannot cross field " + std::to_string(field_i) + " with itself");
  }
  if (field_j < field_i) std::swap(id_i, id_j);
  std::string out;
  out.reserve(id_i.size() + id_j.size() + 1);
  out += id_i;
  out += '|';
  out += id_j;
  return out;
}

std::vector<FieldPair> enumerate_pairs(std::size_t num_fields,
                                       const std::optional<std::vector<std::size_t>>& kif) {
  std::vector<bool> key(num_fields, !kif.has_value());
  if (kif) {
    if (kif->empty()) throw Error("enumerate_pairs: KIF mode requested with an empty field set");
    for (auto k : *kif) {
      if (k >= num_fields) {
        throw Error("enumerate_pairs: KIF field " + std::to_string(k) + " out of range for " +
                    std::to_string(num_fields) + " fields");
      }
      key[k] = true;
    }
  }
  std::vector<FieldPair> pairs;
  for (std::size_t i = 0; i < num_fields; ++i) {
    for (std::size_t j = i + 1; j < num_fields; ++j) {
      if (key[i] || key[j]) pairs.push_back({i, j});
    }
  }
  return pairs;
}

std::vector<Cross> enumerate_crosses(const Instance& instance,
                                     const std::optional<std::vector<std::size_t>>& kif) {
  const auto pairs = enumerate_pairs(instance.feature_ids.size(), kif);
  std::vector<Cross> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    out.push_back({p.lo, p.hi,
                   cross_id(instance.feature_ids[p.lo], p.lo, instance.feature_ids[p.hi], p.hi)});
  }
  return out;
}

Vocabulary::Vocabulary() : ids_{"<oov>"}, fields_{0} {}

std::uint32_t Vocabulary::add(const std::string& feature_id, std::size_t field) {
  auto [it, inserted] = index_.try_emplace(feature_id, static_cast<std::uint32_t>(ids_.size()));
  if (inserted) {
    ids_.push_back(feature_id);
    fields_.push_back(field);
  }
  return it->second;
}

std::uint32_t Vocabulary::lookup(const std::string& feature_id) const {
  auto it = index_.find(feature_id);
  return it == index_.end() ? kOov : it->second;
}

IngestResult ingest(const std::filesystem::path& path, const Schema& schema) {
  IngestResult result;
  result.dataset.schema = schema;
  read_csv(path, schema, [&](Instance&& inst) {
    inst.vocab_indices.reserve(inst.feature_ids.size());
    for (std::size_t f = 0; f < inst.feature_ids.size(); ++f) {
      inst.vocab_indices.push_back(result.vocabulary.add(inst.feature_ids[f], f));
    }
    result.dataset.instances.push_back(std::move(inst));
  });
  return result;
}

Dataset ingest_with_vocabulary(const std::filesystem::path& path, const Schema& schema,
                               const Vocabulary& vocabulary) {
  Dataset ds;
  ds.schema = schema;
  read_csv(path, schema, [&](Instance&& inst) {
    inst.vocab_indices.reserve(inst.feature_ids.size());
    for (const auto& id : inst.feature_ids) inst.vocab_indices.push_back(vocabulary.lookup(id));
    ds.instances.push_back(std::move(inst));
  });
  return ds;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  out.push_back(std::move(cell));
  return out;
}

}  // namespace memonet
