#include "memonet/synthetic.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "memonet/metrics.hpp"
#include "memonet/tensor.hpp"

namespace memonet {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T number(std::string_view key, std::string_view text) {
  text = trim(text);
  T v{};
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size()) {
    throw Error("bad value for " + std::string(key) + ": '" + std::string(text) + "'");
  }
  return v;
}

template <typename T>
std::vector<T> number_list(std::string_view key, std::string_view text) {
  std::vector<T> out;
  text = trim(text);
  while (!text.empty()) {
    auto comma = text.find(',');
    out.push_back(number<T>(key, text.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

// Portable draws: identical streams on every standard library.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
std::uint32_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::uint32_t>(rng() % n);
}

constexpr std::string_view kKeys[] = {"cardinalities", "pair",    "base_rate", "p_low", "p_high",
                                      "n_train",       "n_valid", "n_test",    "seed"};

void write_split(const SyntheticSplit& split, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (std::size_t f = 0; f < split.num_fields; ++f) out << 'f' << f << ',';
  out << "label\n";
  std::string line;
  for (std::size_t i = 0; i < split.size(); ++i) {
    line.clear();
    for (std::size_t f = 0; f < split.num_fields; ++f) {
      line += std::to_string(split.values[i * split.num_fields + f]);
      line += ',';
    }
    line += split.labels[i] ? '1' : '0';
    line += '\n';
    out << line;
  }
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace

bool GeneratorSpec::is_key(std::string_view key) {
  return std::find(std::begin(kKeys), std::end(kKeys), key) != std::end(kKeys);
}

void GeneratorSpec::set(std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "cardinalities") {
    cardinalities = number_list<std::size_t>(key, value);
  } else if (key == "pair") {
    InformativePair p;
    auto c1 = value.find(':');
    if (c1 == std::string_view::npos) throw Error("pair must be lo:hi[:p,p,...], got '" + std::string(value) + "'");
    auto rest = value.substr(c1 + 1);
    auto c2 = rest.find(':');
    p.lo = number<std::size_t>(key, value.substr(0, c1));
    p.hi = number<std::size_t>(key, rest.substr(0, c2));
    if (c2 != std::string_view::npos) p.table = number_list<double>(key, rest.substr(c2 + 1));
    if (p.lo > p.hi) std::swap(p.lo, p.hi);
    pairs.push_back(std::move(p));
  } else if (key == "base_rate") {
    base_rate = number<double>(key, value);
  } else if (key == "p_low") {
    p_low = number<double>(key, value);
  } else if (key == "p_high") {
    p_high = number<double>(key, value);
  } else if (key == "n_train") {
    n_train = number<std::size_t>(key, value);
  } else if (key == "n_valid") {
    n_valid = number<std::size_t>(key, value);
  } else if (key == "n_test") {
    n_test = number<std::size_t>(key, value);
  } else if (key == "seed") {
    seed = number<std::uint64_t>(key, value);
  } else {
    throw Error("unknown generator key '" + std::string(key) + "'");
  }
}

GeneratorSpec GeneratorSpec::parse(std::string_view text) {
  GeneratorSpec spec;
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const std::string where = "generator spec line " + std::to_string(line_no) + ": ";
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw Error(where + "expected key=value, got '" + std::string(line) + "'");
    try {
      spec.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(where + e.what());
    }
  }
  spec.validate();
  return spec;
}

std::string GeneratorSpec::to_text() const {
  std::ostringstream os;
  os << "cardinalities=";
  for (std::size_t i = 0; i < cardinalities.size(); ++i) os << (i ? "," : "") << cardinalities[i];
  os << '\n';
  for (const auto& p : pairs) {
    os << "pair=" << p.lo << ':' << p.hi;
    if (!p.table.empty()) {
      os << ':';
      for (std::size_t i = 0; i < p.table.size(); ++i) os << (i ? "," : "") << fmt(p.table[i]);
    }
    os << '\n';
  }
  os << "base_rate=" << fmt(base_rate) << '\n'
     << "p_low=" << fmt(p_low) << '\n'
     << "p_high=" << fmt(p_high) << '\n'
     << "n_train=" << n_train << '\n'
     << "n_valid=" << n_valid << '\n'
     << "n_test=" << n_test << '\n'
     << "seed=" << seed << '\n';
  return os.str();
}

void GeneratorSpec::validate() const {
  if (cardinalities.size() < 2) throw Error("generator: at least 2 fields required");
  for (auto c : cardinalities) {
    if (c == 0) throw Error("generator: cardinalities must be >= 1");
  }
  auto in_unit = [](double p) { return p > 0.0 && p < 1.0; };
  if (!in_unit(base_rate)) throw Error("generator: base_rate must be in (0, 1)");
  if (!in_unit(p_low) || !in_unit(p_high) || p_low > p_high) {
    throw Error("generator: need 0 < p_low <= p_high < 1");
  }
  for (const auto& p : pairs) {
    if (p.lo == p.hi || p.hi >= cardinalities.size()) {
      throw Error("generator: invalid informative pair " + std::to_string(p.lo) + ":" + std::to_string(p.hi));
    }
    const std::size_t cells = cardinalities[p.lo] * cardinalities[p.hi];
    if (!p.table.empty() && p.table.size() != cells) {
      throw Error("generator: pair " + std::to_string(p.lo) + ":" + std::to_string(p.hi) + " table has " +
                  std::to_string(p.table.size()) + " entries, expected " + std::to_string(cells));
    }
    if (!std::all_of(p.table.begin(), p.table.end(), in_unit)) {
      throw Error("generator: table probabilities must be in (0, 1)");
    }
  }
  if (n_train == 0 || n_valid == 0 || n_test == 0) throw Error("generator: split sizes must be >= 1");
}

GeneratorSpec resolve_tables(const GeneratorSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  GeneratorSpec out = spec;
  for (auto& p : out.pairs) {
    if (!p.table.empty()) continue;
    const std::size_t cells = out.cardinalities[p.lo] * out.cardinalities[p.hi];
    p.table.resize(cells);
    for (auto& v : p.table) v = out.p_low + (out.p_high - out.p_low) * uniform01(rng);
  }
  return out;
}

double bayes_probability(const GeneratorSpec& resolved, std::span<const std::uint32_t> values) {
  if (resolved.pairs.empty()) return resolved.base_rate;
  double acc = 0.0;
  for (const auto& p : resolved.pairs) {
    acc += p.table[values[p.lo] * resolved.cardinalities[p.hi] + values[p.hi]];
  }
  return acc / static_cast<double>(resolved.pairs.size());
}

SyntheticSplit sample_split(const GeneratorSpec& resolved, std::size_t n, std::mt19937_64& rng) {
  SyntheticSplit split;
  const std::size_t f = resolved.num_fields();
  split.num_fields = f;
  split.values.resize(n * f);
  split.labels.resize(n);
  split.bayes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::span<std::uint32_t> row(split.values.data() + i * f, f);
    for (std::size_t k = 0; k < f; ++k) row[k] = uniform_index(rng, resolved.cardinalities[k]);
    const double p = bayes_probability(resolved, row);
    split.bayes[i] = p;
    split.labels[i] = uniform01(rng) < p ? 1 : 0;
  }
  return split;
}

Schema synthetic_schema(std::size_t num_fields) {
  std::vector<FieldSpec> fields;
  for (std::size_t i = 0; i < num_fields; ++i) {
    fields.push_back({"f" + std::to_string(i), i, FieldKind::kCategorical});
  }
  return Schema(std::move(fields), "label");
}

SyntheticData generate(const GeneratorSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  SyntheticData data;
  data.spec = resolve_tables(spec, rng);
  data.schema = synthetic_schema(spec.num_fields());
  data.train = sample_split(data.spec, spec.n_train, rng);
  data.valid = sample_split(data.spec, spec.n_valid, rng);
  data.test = sample_split(data.spec, spec.n_test, rng);
  return data;
}

void write_dataset(const SyntheticData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "schema.txt", std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + (dir / "schema.txt").string());
    out << data.schema.to_text();
  }
  write_split(data.train, dir / "train.csv");
  write_split(data.valid, dir / "valid.csv");
  write_split(data.test, dir / "test.csv");
  std::ofstream oracle(dir / "oracle.csv", std::ios::binary | std::ios::trunc);
  if (!oracle) throw Error("cannot write " + (dir / "oracle.csv").string());
  oracle << "bayes_p\n";
  for (double p : data.test.bayes) oracle << fmt(p) << '\n';
}

double bayes_auc(const SyntheticSplit& split) {
  std::vector<double> labels(split.labels.begin(), split.labels.end());
  return auc(labels, split.bayes);
}

double bayes_auc(const std::filesystem::path& oracle_csv, const std::filesystem::path& test_csv,
                 const std::string& label_column) {
  std::ifstream oracle(oracle_csv);
  if (!oracle) throw Error("cannot open " + oracle_csv.string());
  std::string line;
  if (!std::getline(oracle, line) || trim(line) != "bayes_p") {
    throw Error(oracle_csv.string() + ": expected header 'bayes_p'");
  }
  std::vector<double> probs;
  std::size_t line_no = 1;
  while (std::getline(oracle, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      probs.push_back(number<double>("bayes_p", line));
    } catch (const Error& e) {
      throw Error(oracle_csv.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  std::ifstream test(test_csv);
  if (!test) throw Error("cannot open " + test_csv.string());
  if (!std::getline(test, line)) throw Error(test_csv.string() + ": empty file");
  auto header = split_csv_line(line);
  auto it = std::find(header.begin(), header.end(), label_column);
  if (it == header.end()) throw Error(test_csv.string() + ": missing column '" + label_column + "'");
  const std::size_t col = static_cast<std::size_t>(it - header.begin());
  std::vector<double> labels;
  while (std::getline(test, line)) {
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (col >= cells.size()) throw Error(test_csv.string() + ": short row");
    labels.push_back(trim(cells[col]) == "1" ? 1.0 : 0.0);
  }
  if (labels.size() != probs.size()) {
    throw Error("bayes_auc: oracle has " + std::to_string(probs.size()) + " rows but test split has " +
                std::to_string(labels.size()));
  }
  return auc(labels, probs);
}

}  // namespace memonet
