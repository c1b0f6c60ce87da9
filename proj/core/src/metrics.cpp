#include "memonet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <thread>

#include "json.hpp"

namespace memonet {

double auc(std::span<const double> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) {
    throw Error("auc: " + std::to_string(labels.size()) + " labels vs " + std::to_string(scores.size()) +
                " scores");
  }
  std::size_t n_pos = 0;
  for (double y : labels) n_pos += y > 0.5 ? 1 : 0;
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw Error("auc: needs both classes, got " + std::to_string(n_pos) + " positives and " +
                std::to_string(n_neg) + " negatives");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Midranks (1-based) over tie groups; sums stay exact in double below 2^53.
  double pos_rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] > 0.5) pos_rank_sum += midrank;
    }
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n_neg);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

std::string EvalResult::to_json() const {
  nlohmann::json j;
  j["auc"] = std::isfinite(auc) ? nlohmann::json(auc) : nlohmann::json(nullptr);
  j["logloss"] = logloss;
  j["n_pos"] = n_pos;
  j["n_neg"] = n_neg;
  return j.dump();
}

EvalResult evaluate_predictions(std::span<const double> labels, std::span<const double> predictions) {
  if (labels.empty()) throw Error("evaluate: empty dataset");
  EvalResult r;
  for (double y : labels) (y > 0.5 ? r.n_pos : r.n_neg)++;
  r.logloss = logloss(labels, predictions);
  r.auc = (r.n_pos > 0 && r.n_neg > 0) ? auc(labels, predictions)
                                       : std::numeric_limits<double>::quiet_NaN();
  return r;
}

std::vector<double> predict(const Model& model, const EncodedDataset& data, std::size_t threads,
                            std::size_t shard_rows) {
  std::vector<double> out(data.size());
  if (data.size() == 0) return out;
  shard_rows = std::max<std::size_t>(1, shard_rows);
  const std::size_t shards = (data.size() + shard_rows - 1) / shard_rows;
  auto run_shard = [&](std::size_t s) {
    const std::size_t begin = s * shard_rows;
    const std::size_t end = std::min(data.size(), begin + shard_rows);
    Tape tape;
    auto vars = model.bind_frozen(tape);
    const Batch batch = data.range(begin, end);
    auto fwd = model.forward(vars, batch);
    const Tensor& p = fwd.probability.value();
    std::copy(p.data().begin(), p.data().end(), out.begin() + static_cast<std::ptrdiff_t>(begin));
  };
  threads = std::clamp<std::size_t>(threads, 1, shards);
  if (threads == 1) {
    for (std::size_t s = 0; s < shards; ++s) run_shard(s);
    return out;
  }
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    workers.emplace_back([&, w] {
      try {
        for (std::size_t s = w; s < shards; s += threads) run_shard(s);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

EvalResult evaluate(const Model& model, const EncodedDataset& data, std::size_t threads) {
  const auto preds = predict(model, data, threads);
  return evaluate_predictions(data.labels, preds);
}

}  // namespace memonet
