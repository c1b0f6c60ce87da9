#include "memonet/model.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "memonet/metrics.hpp"

namespace memonet {

namespace {

constexpr double kEmbeddingInitStd = 0.01;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  text = trim(text);
  T v{};
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size()) {
    throw Error("config: bad value for " + std::string(key) + ": '" + std::string(text) + "'");
  }
  return v;
}

std::vector<std::size_t> parse_list(std::string_view key, std::string_view text) {
  text = trim(text);
  std::vector<std::size_t> out;
  if (text.empty() || text == "none") return out;
  while (true) {
    auto comma = text.find(',');
    out.push_back(parse_number<std::size_t>(key, text.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

std::string join_list(const std::vector<std::size_t>& v) {
  if (v.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

void xavier_uniform(Tensor& t, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : t.data()) v = dist(rng);
}

void check_finite_grad(const Parameter& p) {
  auto bad = [&]() { throw Error("train_step: non-finite gradient in '" + p.name + "'"); };
  if (p.row_sparse && !p.all_rows_touched) {
    for (auto r : p.touched_rows) {
      for (double g : p.grad.row(r)) {
        if (!std::isfinite(g)) bad();
      }
    }
  } else if (!p.grad.all_finite()) {
    bad();
  }
}

constexpr std::string_view kConfigKeys[] = {
    "mode",   "restore",    "d",     "l",     "n_codewords", "m_hash",  "s",
    "k_decimals", "mlp",    "kif",   "learning_rate", "batch_size", "epochs", "beta1",
    "beta2",  "epsilon",    "seed",  "hash_seed"};

}  // namespace

std::string_view to_string(ModelMode mode) { return mode == ModelMode::kDnn ? "dnn" : "memonet"; }

ModelMode parse_model_mode(std::string_view text) {
  if (text == "dnn") return ModelMode::kDnn;
  if (text == "memonet") return ModelMode::kMemoNet;
  throw Error("unknown model mode '" + std::string(text) + "' (expected dnn or memonet)");
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error("config: " + what);
  };
  require(d >= 1, "d must be >= 1");
  require(n_codewords >= 1 && n_codewords <= UINT32_MAX, "n_codewords must be in [1, 2^32)");
  require(m_hash >= 1 && m_hash <= kMaxHashFunctions, "m_hash must be in [1, 16]");
  require(s >= 1, "s must be >= 1");
  require(k_decimals >= 0 && k_decimals <= 17, "k_decimals must be in [0, 17]");
  require(std::all_of(mlp.begin(), mlp.end(), [](std::size_t w) { return w >= 1; }), "mlp widths must be >= 1");
  require(!kif || !kif->empty(), "kif set must not be empty");
  require(learning_rate >= 0.0 && std::isfinite(learning_rate), "learning_rate must be finite and >= 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(beta1 >= 0.0 && beta1 < 1.0, "beta1 must be in [0, 1)");
  require(beta2 >= 0.0 && beta2 < 1.0, "beta2 must be in [0, 1)");
  require(epsilon > 0.0, "epsilon must be > 0");
}

bool TrainConfig::is_key(std::string_view key) {
  return std::find(std::begin(kConfigKeys), std::end(kConfigKeys), key) != std::end(kConfigKeys);
}

void TrainConfig::set(std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "mode") {
    mode = parse_model_mode(value);
  } else if (key == "restore") {
    restore = parse_restore_mode(value);
  } else if (key == "d") {
    d = parse_number<std::size_t>(key, value);
  } else if (key == "l") {
    l = parse_number<std::size_t>(key, value);
  } else if (key == "n_codewords") {
    n_codewords = parse_number<std::size_t>(key, value);
  } else if (key == "m_hash") {
    m_hash = parse_number<unsigned>(key, value);
  } else if (key == "s") {
    s = parse_number<std::size_t>(key, value);
  } else if (key == "k_decimals") {
    k_decimals = parse_number<int>(key, value);
  } else if (key == "mlp") {
    mlp = parse_list(key, value);
  } else if (key == "kif") {
    auto v = parse_list(key, value);
    kif = v.empty() ? std::nullopt : std::optional(std::move(v));
  } else if (key == "learning_rate") {
    learning_rate = parse_number<double>(key, value);
  } else if (key == "batch_size") {
    batch_size = parse_number<std::size_t>(key, value);
  } else if (key == "epochs") {
    epochs = parse_number<std::size_t>(key, value);
  } else if (key == "beta1") {
    beta1 = parse_number<double>(key, value);
  } else if (key == "beta2") {
    beta2 = parse_number<double>(key, value);
  } else if (key == "epsilon") {
    epsilon = parse_number<double>(key, value);
  } else if (key == "seed") {
    seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "hash_seed") {
    hash_seed = parse_number<std::uint64_t>(key, value);
  } else {
    throw Error("config: unknown key '" + std::string(key) + "'");
  }
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  os << "mode=" << to_string(mode) << '\n'
     << "restore=" << to_string(restore) << '\n'
     << "d=" << d << '\n'
     << "l=" << codeword_width() << '\n'
     << "n_codewords=" << n_codewords << '\n'
     << "m_hash=" << m_hash << '\n'
     << "s=" << s << '\n'
     << "k_decimals=" << k_decimals << '\n'
     << "mlp=" << join_list(mlp) << '\n'
     << "kif=" << (kif ? join_list(*kif) : "none") << '\n'
     << "learning_rate=" << format_double(learning_rate) << '\n'
     << "batch_size=" << batch_size << '\n'
     << "epochs=" << epochs << '\n'
     << "beta1=" << format_double(beta1) << '\n'
     << "beta2=" << format_double(beta2) << '\n'
     << "epsilon=" << format_double(epsilon) << '\n'
     << "seed=" << seed << '\n'
     << "hash_seed=" << hash_seed << '\n';
  return os.str();
}

TrainConfig TrainConfig::parse(std::string_view text) {
  TrainConfig cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error("config line " + std::to_string(line_no) + ": expected key=value, got '" +
                  std::string(line) + "'");
    }
    try {
      cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const Error& e) {
      throw Error("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

Model::Model(const TrainConfig& config, std::size_t num_fields, std::size_t vocab_size)
    : config_(config), num_fields_(num_fields) {
  config_.validate();
  if (config_.l == 0) config_.l = config_.d;
  if (num_fields < 2) throw Error("model: at least 2 fields required");
  if (vocab_size < 1) throw Error("model: vocabulary must hold at least the OOV row");
  const std::size_t d = config_.d;
  embedding = Parameter("embedding", Tensor(vocab_size, d), true);
  if (config_.mode == ModelMode::kMemoNet) {
    const std::size_t l = config_.codeword_width();
    codebook.emplace(config_.n_codewords, l, config_.m_hash, config_.hash_seed);
    hcnet.emplace(HcnetDims{num_fields, d, l, config_.m_hash, config_.s}, config_.restore);
    pairs_ = enumerate_pairs(num_fields, config_.kif);
  }
  std::size_t width = input_width();
  for (std::size_t i = 0; i < config_.mlp.size(); ++i) {
    const std::string prefix = "mlp." + std::to_string(i);
    mlp.push_back({Parameter(prefix + ".weight", Tensor(width, config_.mlp[i])),
                   Parameter(prefix + ".bias", Tensor(1, config_.mlp[i]))});
    width = config_.mlp[i];
  }
  pred_w = Parameter("pred.weight", Tensor(width, 1));
  pred_b = Parameter("pred.bias", Tensor(1, 1));
}

std::size_t Model::input_width() const {
  const std::size_t fd = num_fields_ * config_.d;
  return config_.mode == ModelMode::kMemoNet ? 2 * fd : fd;
}

void Model::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, kEmbeddingInitStd);
  for (auto& v : embedding.value.data()) v = normal(rng);
  if (codebook) codebook->init_normal(rng, kEmbeddingInitStd);
  if (hcnet) hcnet->init_xavier(rng);
  for (auto& layer : mlp) {
    xavier_uniform(layer.weight.value, rng);
    layer.bias.value.fill(0.0);
  }
  xavier_uniform(pred_w.value, rng);
  pred_b.value.fill(0.0);
}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out{&embedding};
  if (codebook) out.push_back(&codebook->matrix);
  if (hcnet) {
    for (Parameter* p : hcnet->parameters()) out.push_back(p);
  }
  for (auto& layer : mlp) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  out.push_back(&pred_w);
  out.push_back(&pred_b);
  return out;
}

std::vector<const Parameter*> Model::parameters() const {
  auto ps = const_cast<Model*>(this)->parameters();
  return {ps.begin(), ps.end()};
}

Model::Vars Model::bind(Tape& tape) {
  Vars v;
  v.embedding = tape.param(embedding);
  if (codebook) v.codebook = tape.param(codebook->matrix);
  if (hcnet) v.hcnet = HcnetVars::bind(tape, *hcnet);
  for (auto& layer : mlp) v.mlp.emplace_back(tape.param(layer.weight), tape.param(layer.bias));
  v.pred_w = tape.param(pred_w);
  v.pred_b = tape.param(pred_b);
  return v;
}

Model::Vars Model::bind_frozen(Tape& tape) const {
  Vars v;
  v.embedding = tape.frozen(embedding);
  if (codebook) v.codebook = tape.frozen(codebook->matrix);
  if (hcnet) {
    HcnetVars h;
    h.w1 = tape.frozen(hcnet->w1);
    if (hcnet->mode == RestoreMode::kAttentive) {
      h.w2 = tape.frozen(hcnet->w2);
      h.w3 = tape.frozen(hcnet->w3);
    }
    h.w4 = tape.frozen(hcnet->w4);
    h.w5 = tape.frozen(hcnet->w5);
    v.hcnet = h;
  }
  for (const auto& layer : mlp) v.mlp.emplace_back(tape.frozen(layer.weight), tape.frozen(layer.bias));
  v.pred_w = tape.frozen(pred_w);
  v.pred_b = tape.frozen(pred_b);
  return v;
}

Model::Forward Model::forward(const Vars& vars, const Batch& batch) const {
  if (batch.vocab.size() != batch.size * num_fields_) {
    throw Error("forward: batch carries " + std::to_string(batch.vocab.size()) + " indices for " +
                std::to_string(batch.size) + " rows of " + std::to_string(num_fields_) + " fields");
  }
  Forward out;
  out.v = reshape(gather_rows(vars.embedding, batch.vocab), batch.size, num_fields_ * config_.d);
  Var h = out.v;
  if (hcnet) {
    HcnetBatch hb{batch.size, pairs_, batch.addresses};
    auto hc = hcnet_forward(hb, out.v, vars.codebook, *vars.hcnet, *hcnet);
    out.v2 = hc.v2;
    out.attention = hc.attention;
    h = concat({out.v, hc.v2});
  }
  for (const auto& [w, b] : vars.mlp) h = relu(add_row(matmul(h, w), b));
  out.logits = add_row(matmul(h, vars.pred_w), vars.pred_b);
  out.probability = clamp(sigmoid(out.logits), kMinProbability, kMaxProbability);
  return out;
}

Batch EncodedDataset::batch(std::span<const std::size_t> rows) const {
  Batch b;
  b.size = rows.size();
  b.vocab.reserve(rows.size() * num_fields);
  b.labels.reserve(rows.size());
  for (std::size_t r : rows) {
    if (r >= size()) throw Error("batch: row " + std::to_string(r) + " out of range");
    b.vocab.insert(b.vocab.end(), vocab.begin() + static_cast<std::ptrdiff_t>(r * num_fields),
                   vocab.begin() + static_cast<std::ptrdiff_t>((r + 1) * num_fields));
    b.labels.push_back(labels[r]);
  }
  b.addresses.resize(num_pairs * rows.size() * m);
  for (std::size_t p = 0; p < num_pairs; ++p) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::size_t src = (rows[i] * num_pairs + p) * m;
      std::copy_n(addresses.begin() + static_cast<std::ptrdiff_t>(src), m,
                  b.addresses.begin() + static_cast<std::ptrdiff_t>((p * rows.size() + i) * m));
    }
  }
  return b;
}

Batch EncodedDataset::range(std::size_t begin, std::size_t end) const {
  std::vector<std::size_t> rows(end - begin);
  std::iota(rows.begin(), rows.end(), begin);
  return batch(rows);
}

EncodedDataset encode(const Dataset& dataset, const TrainConfig& config) {
  EncodedDataset enc;
  enc.num_fields = dataset.schema.num_fields();
  std::vector<FieldPair> pairs;
  if (config.mode == ModelMode::kMemoNet) pairs = enumerate_pairs(enc.num_fields, config.kif);
  enc.num_pairs = pairs.size();
  enc.m = config.mode == ModelMode::kMemoNet ? config.m_hash : 0;
  enc.vocab.reserve(dataset.size() * enc.num_fields);
  enc.labels.reserve(dataset.size());
  enc.addresses.resize(dataset.size() * enc.num_pairs * enc.m);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Instance& inst = dataset.instances[i];
    if (inst.vocab_indices.size() != enc.num_fields || inst.feature_ids.size() != enc.num_fields) {
      throw Error("encode: instance " + std::to_string(i) + " does not match the schema width");
    }
    enc.vocab.insert(enc.vocab.end(), inst.vocab_indices.begin(), inst.vocab_indices.end());
    enc.labels.push_back(static_cast<double>(inst.label));
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      std::span<std::uint32_t> out(enc.addresses.data() + (i * enc.num_pairs + p) * enc.m, enc.m);
      cross_address_set_into(inst.feature_ids[pairs[p].lo], inst.feature_ids[pairs[p].hi],
                             config.n_codewords, config.hash_seed, out);
    }
  }
  return enc;
}

Embedded embed_instance(Var table, std::span<const std::uint32_t> vocab_indices,
                        std::size_t num_fields) {
  if (num_fields == 0 || vocab_indices.size() % num_fields != 0) {
    throw Error("embed_instance: " + std::to_string(vocab_indices.size()) +
                " indices do not split into rows of " + std::to_string(num_fields) + " fields");
  }
  const std::size_t rows = vocab_indices.size() / num_fields;
  const std::size_t d = table.cols();
  Embedded out;
  out.v = reshape(gather_rows(table, vocab_indices), rows, num_fields * d);
  for (std::size_t i = 0; i < num_fields; ++i) out.fields.push_back(slice_cols(out.v, i * d, d));
  return out;
}

double logloss(std::span<const double> labels, std::span<const double> predictions) {
  if (labels.size() != predictions.size() || labels.empty()) {
    throw Error("logloss: " + std::to_string(labels.size()) + " labels vs " +
                std::to_string(predictions.size()) + " predictions");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = std::clamp(predictions[i], kMinProbability, kMaxProbability);
    acc -= labels[i] * std::log(p) + (1.0 - labels[i]) * std::log(1.0 - p);
  }
  return acc / static_cast<double>(labels.size());
}

AdamState AdamState::for_model(const Model& model) {
  AdamState s;
  for (const Parameter* p : model.parameters()) {
    s.first.emplace_back(p->value.rows(), p->value.cols());
    s.second.emplace_back(p->value.rows(), p->value.cols());
  }
  return s;
}

void adam_update(std::span<Parameter* const> params, AdamState& state, const TrainConfig& config) {
  if (state.first.size() != params.size() || state.second.size() != params.size()) {
    throw Error("adam: state tracks " + std::to_string(state.first.size()) + " tensors for " +
                std::to_string(params.size()) + " parameters");
  }
  ++state.timestep;
  const double t = static_cast<double>(state.timestep);
  const double bc1 = 1.0 - std::pow(config.beta1, t);
  const double bc2 = 1.0 - std::pow(config.beta2, t);
  const double lr = config.learning_rate;
  const double b1 = config.beta1, b2 = config.beta2, eps = config.epsilon;
  auto update = [&](double* p, double* m, double* v, const double* g, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
  };
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    Tensor& m = state.first[k];
    Tensor& v = state.second[k];
    if (p.row_sparse && !p.all_rows_touched) {
      const std::size_t w = p.value.cols();
      for (auto r : p.touched_rows) {
        update(&p.value(r, 0), &m(r, 0), &v(r, 0), &p.grad(r, 0), w);
      }
    } else {
      update(p.value.data().data(), m.data().data(), v.data().data(), p.grad.data().data(), p.value.size());
    }
  }
}

double train_step(Model& model, AdamState& adam, const Batch& batch) {
  if (batch.size == 0) throw Error("train_step: empty batch");
  auto params = model.parameters();
  for (Parameter* p : params) p->zero_grad();
  Tape tape;
  auto vars = model.bind(tape);
  auto fwd = model.forward(vars, batch);
  Var loss = binary_logloss(fwd.probability, batch.labels);
  const double value = loss.value()[0];
  if (!std::isfinite(value)) throw Error("train_step: non-finite loss");
  tape.backward(loss);
  for (const Parameter* p : params) check_finite_grad(*p);
  adam_update(params, adam, model.config());
  return value;
}

std::string EpochMetrics::to_json() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["train_logloss"] = train_logloss;
  j["valid_logloss"] = valid_logloss;
  j["valid_auc"] = std::isfinite(valid_auc) ? nlohmann::ordered_json(valid_auc) : nlohmann::ordered_json(nullptr);
  j["seconds"] = seconds;
  return j.dump();
}

bool EpochMetrics::same_metrics(const EpochMetrics& o) const {
  auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
  return epoch == o.epoch && same(train_logloss, o.train_logloss) && same(valid_logloss, o.valid_logloss) &&
         same(valid_auc, o.valid_auc);
}

FitResult fit(Model model, const EncodedDataset& train, const EncodedDataset& valid,
              const EpochCallback& on_epoch) {
  const TrainConfig& cfg = model.config();
  FitResult result;
  result.best = model;
  result.best_valid_auc = std::numeric_limits<double>::quiet_NaN();
  if (cfg.epochs == 0) return result;
  if (train.size() == 0) throw Error("fit: empty training set");
  if (valid.size() == 0) throw Error("fit: empty validation set");

  AdamState adam = AdamState::for_model(model);
  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  bool have_best = false;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const Batch batch = train.batch(std::span(order).subspan(begin, end - begin));
      loss_sum += train_step(model, adam, batch) * static_cast<double>(batch.size);
    }
    const EvalResult eval = evaluate(model, valid);
    EpochMetrics m;
    m.epoch = epoch;
    m.train_logloss = loss_sum / static_cast<double>(train.size());
    m.valid_logloss = eval.logloss;
    m.valid_auc = eval.auc;
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.push_back(m);
    if (!have_best || eval.auc > result.best_valid_auc) {
      have_best = true;
      result.best = model;
      result.best_epoch = epoch;
      result.best_valid_auc = eval.auc;
    }
    if (on_epoch) on_epoch(m);
  }
  return result;
}

FitResult fit(const TrainConfig& config, std::size_t num_fields, std::size_t vocab_size,
              const EncodedDataset& train, const EncodedDataset& valid, const EpochCallback& on_epoch) {
  Model model(config, num_fields, vocab_size);
  model.initialize(config.seed);
  return fit(std::move(model), train, valid, on_epoch);
}

}  // namespace memonet
