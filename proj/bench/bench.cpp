// Serial reference against the OpenMP path for the batch kernels.

#include <benchmark/benchmark.h>

#include "cropmon/baselines.hpp"
#include "cropmon/classifier.hpp"
#include "cropmon/phenology.hpp"
#include "cropmon/pipeline.hpp"

namespace cropmon {
namespace {

Execution mode(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::serial : Execution::parallel;
}

std::vector<ClassCount> mix(std::size_t per_class) { return {{"corn", per_class}, {"soybean", per_class}}; }

Dataset make_set(std::size_t per_class, std::uint64_t seed) {
  return Dataset::from_labeled(synth_dataset(mix(per_class), default_templates(), SeasonScenario{}, seed),
                               {"corn", "soybean"});
}

void BM_SynthDataset(benchmark::State& state) {
  const auto m = mix(250);
  for (auto _ : state) {
    benchmark::DoNotOptimize(synth_dataset(m, default_templates(), SeasonScenario{}, 1, mode(state)));
  }
  state.SetItemsProcessed(state.iterations() * 500);
}
BENCHMARK(BM_SynthDataset)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_PredictBatch(benchmark::State& state) {
  const Dataset d = make_set(100, 2);
  TrainConfig cfg;
  cfg.epochs = 1;
  const ModelBundle model = train(d, cfg);
  for (auto _ : state) benchmark::DoNotOptimize(predict_batch(model, d, mode(state)));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d.size()));
}
BENCHMARK(BM_PredictBatch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_KnnDtwBatch(benchmark::State& state) {
  const Dataset train_set = make_set(20, 3);
  const Dataset queries = make_set(10, 4);
  for (auto _ : state) benchmark::DoNotOptimize(knn_dtw_batch(train_set, queries, mode(state)));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(queries.size()));
}
BENCHMARK(BM_KnnDtwBatch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace cropmon

BENCHMARK_MAIN();
