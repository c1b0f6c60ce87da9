#include "memonet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace memonet {

namespace {

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void str(const std::string& s) {
    u64(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void raw(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }

 private:
  void le(std::uint64_t v, int bytes) {
    char buf[8];
    for (int i = 0; i < bytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out_.write(buf, bytes);
  }
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() { return std::bit_cast<double>(le(8)); }
  std::string str() {
    const std::uint64_t n = u64();
    if (n > (1ULL << 32)) fail("implausible string length");
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }
  void raw(char* p, std::size_t n) {
    in_.read(p, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) fail("truncated file");
  }
  [[noreturn]] void fail(const std::string& what) const { throw Error("checkpoint " + path_ + ": " + what); }

 private:
  std::uint64_t le(int bytes) {
    unsigned char buf[8];
    raw(reinterpret_cast<char*>(buf), static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  }
  std::istream& in_;
  std::string path_;
};

std::string meta_text(const std::map<std::string, std::string>& meta) {
  std::string out;
  for (const auto& [k, v] : meta) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw Error("checkpoint: metadata keys/values must not contain '=' or newlines");
    }
    out += k + "=" + v + "\n";
  }
  return out;
}

std::map<std::string, std::string> parse_meta(const std::string& text) {
  std::map<std::string, std::string> meta;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return meta;
}

void check_dims(const TrainConfig& stored, const TrainConfig& expected) {
  auto cmp = [](const char* key, auto want, auto got) {
    if (want != got) {
      throw Error(std::string("checkpoint: ") + key + " mismatch: expected " + key + "=" +
                  std::to_string(want) + ", actual " + key + "=" + std::to_string(got));
    }
  };
  cmp("d", expected.d, stored.d);
  cmp("l", expected.codeword_width(), stored.codeword_width());
  if (expected.mode != stored.mode) {
    throw Error("checkpoint: mode mismatch: expected " + std::string(to_string(expected.mode)) + ", actual " +
                std::string(to_string(stored.mode)));
  }
  if (expected.mode == ModelMode::kMemoNet) {
    cmp("n_codewords", expected.n_codewords, stored.n_codewords);
    cmp("m_hash", expected.m_hash, stored.m_hash);
    cmp("s", expected.s, stored.s);
  }
  if (expected.mlp != stored.mlp) throw Error("checkpoint: mlp widths mismatch");
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model, const Schema& schema,
                     const Vocabulary& vocabulary, const std::map<std::string, std::string>& meta) {
  if (vocabulary.size() != model.vocab_size()) {
    throw Error("save_checkpoint: vocabulary has " + std::to_string(vocabulary.size()) +
                " entries but the embedding table has " + std::to_string(model.vocab_size()) + " rows");
  }
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    Writer w(out);
    w.raw(kCheckpointMagic, sizeof(kCheckpointMagic));
    w.u32(kCheckpointVersion);
    w.str(schema.to_text());
    w.str(model.config().to_text());
    w.str(meta_text(meta));
    w.u64(vocabulary.size());
    for (std::uint32_t i = 1; i < vocabulary.size(); ++i) {
      w.u64(vocabulary.field_at(i));
      w.str(vocabulary.id_at(i));
    }
    const auto params = model.parameters();
    w.u64(params.size());
    for (const Parameter* p : params) {
      w.str(p->name);
      w.u32(2);
      w.u64(p->value.rows());
      w.u64(p->value.cols());
      for (double v : p->value.data()) w.f64(v);
    }
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const TrainConfig* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  Reader r(in, path.string());
  char magic[sizeof(kCheckpointMagic)];
  r.raw(magic, sizeof(magic));
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) r.fail("bad magic, not a checkpoint");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    r.fail("unsupported format version " + std::to_string(version) + ", expected " +
           std::to_string(kCheckpointVersion));
  }
  Checkpoint ck;
  ck.schema = Schema::parse(r.str());
  ck.config = TrainConfig::parse(r.str());
  ck.meta = parse_meta(r.str());
  if (expected) check_dims(ck.config, *expected);

  const std::uint64_t vocab_size = r.u64();
  if (vocab_size == 0) r.fail("vocabulary must include the OOV slot");
  for (std::uint64_t i = 1; i < vocab_size; ++i) {
    const std::uint64_t field = r.u64();
    ck.vocabulary.add(r.str(), field);
  }
  if (ck.vocabulary.size() != vocab_size) r.fail("duplicate vocabulary entries");

  ck.model = Model(ck.config, ck.schema.num_fields(), vocab_size);
  auto params = ck.model.parameters();
  const std::uint64_t count = r.u64();
  if (count != params.size()) {
    r.fail("expected " + std::to_string(params.size()) + " tensors for this config, found " + std::to_string(count));
  }
  for (Parameter* p : params) {
    const std::string name = r.str();
    if (name != p->name) r.fail("expected tensor '" + p->name + "', found '" + name + "'");
    const std::uint32_t rank = r.u32();
    if (rank != 2) r.fail("tensor '" + name + "' has rank " + std::to_string(rank));
    const std::uint64_t rows = r.u64();
    const std::uint64_t cols = r.u64();
    if (rows != p->value.rows() || cols != p->value.cols()) {
      r.fail("tensor '" + name + "' shape mismatch: expected " + p->value.shape_str() + ", actual [" +
             std::to_string(rows) + "x" + std::to_string(cols) + "]");
    }
    for (auto& v : p->value.data()) v = r.f64();
  }
  if (in.peek() != std::char_traits<char>::eof()) r.fail("trailing bytes after the last tensor");
  return ck;
}

}  // namespace memonet
