#include "memonet/kif.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "memonet/hcnet.hpp"

namespace memonet {

std::string_view to_string(KifMethod method) { return method == KifMethod::kFnr ? "fnr" : "far"; }

KifMethod parse_kif_method(std::string_view text) {
  if (text == "fnr") return KifMethod::kFnr;
  if (text == "far") return KifMethod::kFar;
  throw Error("unknown KIF method '" + std::string(text) + "' (expected fnr or far)");
}

FieldScoreReport rank_fields(KifMethod method, const Schema& schema, std::span<const double> scores) {
  if (scores.size() != schema.num_fields()) {
    throw Error("rank_fields: " + std::to_string(scores.size()) + " scores for " +
                std::to_string(schema.num_fields()) + " fields");
  }
  FieldScoreReport report;
  report.method = method;
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  for (std::size_t r = 0; r < order.size(); ++r) {
    const std::size_t f = order[r];
    report.fields.push_back({f, schema.field(f).name, scores[f], r + 1});
  }
  return report;
}

std::string FieldScoreReport::to_json() const {
  nlohmann::ordered_json j;
  j["method"] = std::string(to_string(method));
  j["fields"] = nlohmann::ordered_json::array();
  for (const auto& f : fields) {
    nlohmann::ordered_json e;
    e["field"] = f.field;
    e["name"] = f.name;
    e["score"] = f.score;
    e["rank"] = f.rank;
    j["fields"].push_back(std::move(e));
  }
  return j.dump(2);
}

std::string FieldScoreReport::to_table() const {
  std::size_t name_w = 4;
  for (const auto& f : fields) name_w = std::max(name_w, f.name.size());
  std::ostringstream os;
  os << std::left << std::setw(6) << "rank" << std::setw(7) << "field" << std::setw(static_cast<int>(name_w) + 2)
     << "name" << "score (" << to_string(method) << ")\n";
  for (const auto& f : fields) {
    os << std::left << std::setw(6) << f.rank << std::setw(7) << f.field << std::setw(static_cast<int>(name_w) + 2)
       << f.name << std::setprecision(10) << f.score << '\n';
  }
  return os.str();
}

FieldScoreReport fnr_scores(const Vocabulary& vocabulary, const Schema& schema) {
  std::vector<double> counts(schema.num_fields(), 0.0);
  for (std::uint32_t i = 1; i < vocabulary.size(); ++i) {
    const std::size_t f = vocabulary.field_at(i);
    if (f >= counts.size()) throw Error("fnr_scores: vocabulary entry references field " + std::to_string(f));
    counts[f] += 1.0;
  }
  return rank_fields(KifMethod::kFnr, schema, counts);
}

std::vector<double> accumulate_field_attention(const Tensor& attention, std::size_t num_fields,
                                               std::span<const FieldPair> pairs) {
  if (attention.cols() != num_fields * (num_fields - 1)) {
    throw Error("accumulate_field_attention: attention has " + std::to_string(attention.cols()) +
                " columns for " + std::to_string(num_fields) + " fields");
  }
  std::vector<std::pair<std::size_t, std::size_t>> columns;  // (field, column)
  for (const auto& p : pairs) {
    columns.emplace_back(p.lo, gas_column(p.lo, p.hi, num_fields));
    columns.emplace_back(p.hi, gas_column(p.hi, p.lo, num_fields));
  }
  std::sort(columns.begin(), columns.end(), [](auto a, auto b) { return a.second < b.second; });
  std::vector<double> scores(num_fields, 0.0);
  for (std::size_t r = 0; r < attention.rows(); ++r) {
    for (const auto& [field, col] : columns) scores[field] += attention(r, col);
  }
  return scores;
}

std::vector<double> far_accumulate(const Model& model, const EncodedDataset& data, std::size_t shard_rows) {
  if (!model.has_hcnet()) throw Error("far_scores: model has no HCNet (trained in dnn mode)");
  std::vector<double> scores(model.num_fields(), 0.0);
  for (std::size_t begin = 0; begin < data.size(); begin += shard_rows) {
    const std::size_t end = std::min(data.size(), begin + shard_rows);
    Tape tape;
    auto vars = model.bind_frozen(tape);
    auto fwd = model.forward(vars, data.range(begin, end));
    auto part = accumulate_field_attention(fwd.attention->value(), model.num_fields(), model.pairs());
    for (std::size_t f = 0; f < scores.size(); ++f) scores[f] += part[f];
  }
  return scores;
}

FieldScoreReport far_scores(const Model& model, const EncodedDataset& data, const Schema& schema) {
  return rank_fields(KifMethod::kFar, schema, far_accumulate(model, data));
}

std::vector<std::size_t> select_kif(const FieldScoreReport& report, std::size_t top_k) {
  if (top_k < 1 || top_k > report.fields.size()) {
    throw Error("select_kif: top_k=" + std::to_string(top_k) + " outside [1, " +
                std::to_string(report.fields.size()) + "]");
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < top_k; ++i) out.push_back(report.fields[i].field);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace memonet
