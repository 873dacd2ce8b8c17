#include <benchmark/benchmark.h>

#include "srfl/dataset.hpp"
#include "srfl/federated.hpp"
#include "srfl/models.hpp"
#include "srfl/random.hpp"
#include "srfl/rf_oracle.hpp"
#include "srfl/scenario.hpp"

using namespace srfl;

namespace {

data::Context normalized_context(std::uint64_t seed) {
  auto base = scenario::generate_deployment(scenario::training3(), seed, {}, 0);
  auto ctx = data::build_context(0, scenario::ProfileKind::kTraining3,
                                 scenario::vary_sta_locations(base, 5, seed), {}, 6, 4);
  const std::vector<data::ContextDataset> tables = {ctx.data};
  ctx.data = data::normalize(ctx.data, data::fit_normalizer(tables));
  return ctx;
}

void BM_Oracle(benchmark::State& state) {
  const auto d = scenario::generate_deployment(scenario::training2(), 3, {}, 0);
  const auto sweep = scenario::sweep_thresholds(d);
  const oracle::RadioParams radio;
  for (auto _ : state) {
    for (const auto& v : sweep) benchmark::DoNotOptimize(oracle::simulate_throughput(v, radio));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(sweep.size()));
}
BENCHMARK(BM_Oracle);

void BM_TrainStep(benchmark::State& state) {
  const auto arch = static_cast<models::Arch>(state.range(0));
  auto cfg = models::ModelConfig::defaults(arch);
  if (arch == models::Arch::kWirelessAi) cfg.grid = {32, 32, 2.5};
  auto model = models::make_model(cfg);
  const auto samples = model->make_samples(normalized_context(5));
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < std::min<std::size_t>(21, samples.size()); ++i) idx.push_back(i);
  const auto batch = samples.subset(idx);
  std::vector<double> grad;
  for (auto _ : state) benchmark::DoNotOptimize(model->loss_and_gradient(batch, grad, 1));
  state.SetLabel(std::string(models::to_string(arch)));
}
BENCHMARK(BM_TrainStep)
    ->Arg(static_cast<int>(models::Arch::kFederationS))
    ->Arg(static_cast<int>(models::Arch::kFedIpc))
    ->Arg(static_cast<int>(models::Arch::kWirelessAi))
    ->Unit(benchmark::kMicrosecond);

void BM_Aggregate(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  Rng rng(9);
  std::vector<fed::ClientUpdate> ups(k);
  for (std::size_t i = 0; i < k; ++i) {
    ups[i].context_id = static_cast<int>(i);
    ups[i].n_samples = 84;
    ups[i].n_stas = 4;
    ups[i].params.resize(7000);
    for (auto& p : ups[i].params) p = rng.uniform(-1.0, 1.0);
  }
  for (auto _ : state) benchmark::DoNotOptimize(fed::federations_aggregate(ups));
}
BENCHMARK(BM_Aggregate)->Arg(10)->Arg(100)->Arg(500)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
