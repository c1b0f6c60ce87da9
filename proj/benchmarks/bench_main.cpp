#include <benchmark/benchmark.h>

#include <random>
#include <string>

#include "memonet/codebook.hpp"
#include "memonet/metrics.hpp"
#include "memonet/model.hpp"

namespace {

using namespace memonet;

void BM_CrossAddressSet(benchmark::State& state) {
  const Codebook cb(1'000'000, 10, static_cast<unsigned>(state.range(0)), 0);
  std::vector<std::uint32_t> out(cb.m);
  std::size_t i = 0;
  for (auto _ : state) {
    cb.cross_address_set_into("3_" + std::to_string(i % 1000), "7_" + std::to_string(i % 313), out);
    benchmark::DoNotOptimize(out.data());
    ++i;
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_CrossAddressSet)->Arg(1)->Arg(2)->Arg(4);

struct Setup {
  Model model;
  Batch batch;
};

Setup make_setup(ModelMode mode, RestoreMode restore, std::size_t fields, std::size_t batch_size) {
  TrainConfig cfg;
  cfg.mode = mode;
  cfg.restore = restore;
  cfg.d = 8;
  cfg.n_codewords = 16384;
  cfg.s = 16;
  cfg.mlp = {64, 32};
  Setup s{Model(cfg, fields, 1000), {}};
  s.model.initialize(1);
  std::mt19937_64 rng(2);
  s.batch.size = batch_size;
  for (std::size_t i = 0; i < batch_size * fields; ++i) s.batch.vocab.push_back(rng() % 1000);
  for (std::size_t i = 0; i < s.model.pairs().size() * batch_size * cfg.m_hash; ++i) {
    s.batch.addresses.push_back(rng() % cfg.n_codewords);
  }
  for (std::size_t i = 0; i < batch_size; ++i) s.batch.labels.push_back(static_cast<double>(rng() % 2));
  return s;
}

void train_step_bench(benchmark::State& state, ModelMode mode, RestoreMode restore) {
  Setup s = make_setup(mode, restore, static_cast<std::size_t>(state.range(0)), 256);
  AdamState adam = AdamState::for_model(s.model);
  for (auto _ : state) benchmark::DoNotOptimize(train_step(s.model, adam, s.batch));
  state.SetItemsProcessed(state.iterations() * 256);
}

void BM_TrainStepDnn(benchmark::State& state) { train_step_bench(state, ModelMode::kDnn, RestoreMode::kLinear); }
void BM_TrainStepLmr(benchmark::State& state) { train_step_bench(state, ModelMode::kMemoNet, RestoreMode::kLinear); }
void BM_TrainStepAmr(benchmark::State& state) {
  train_step_bench(state, ModelMode::kMemoNet, RestoreMode::kAttentive);
}
BENCHMARK(BM_TrainStepDnn)->Arg(2)->Arg(6)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_TrainStepLmr)->Arg(2)->Arg(6)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_TrainStepAmr)->Arg(2)->Arg(6)->Unit(benchmark::kMicrosecond);

void BM_Forward(benchmark::State& state) {
  Setup s = make_setup(ModelMode::kMemoNet, RestoreMode::kLinear, static_cast<std::size_t>(state.range(0)), 1024);
  for (auto _ : state) {
    Tape tape;
    auto fwd = s.model.forward(s.model.bind_frozen(tape), s.batch);
    benchmark::DoNotOptimize(fwd.probability.value().data().data());
  }
  state.SetItemsProcessed(state.iterations() * 1024);
}
BENCHMARK(BM_Forward)->Arg(2)->Arg(6)->Unit(benchmark::kMicrosecond);

void BM_Auc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> y(n), p(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<double>(rng() % 2);
    p[i] = u(rng);
  }
  for (auto _ : state) benchmark::DoNotOptimize(auc(y, p));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Auc)->Arg(20000)->Arg(200000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
