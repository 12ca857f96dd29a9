// Microbenchmarks for the hot paths: the encoder forward pass, the full
// gradient computation, and attention summarization.
#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "cropattn/explain.hpp"
#include "cropattn/model.hpp"
#include "cropattn/rng.hpp"
#include "cropattn/types.hpp"

namespace {

using namespace cropattn;

ModelConfig bench_config(int t_max) {
  ModelConfig mc;
  mc.num_layers = 1;
  mc.num_heads = 2;
  mc.model_dim = 64;
  mc.num_classes = 8;
  mc.t_max = t_max;
  return mc.resolved();
}

PaddedBatch bench_batch(Rng& rng, int batch_size, int t_max, int num_classes) {
  PaddedBatch batch;
  batch.t_max = t_max;
  for (int r = 0; r < batch_size; ++r) {
    BatchRow row;
    row.valid_len = t_max - static_cast<int>(rng.uniform_index(4));
    row.parcel_id = "p" + std::to_string(r);
    row.label = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(num_classes)));
    row.bands = Matrix::Zero(t_max, kNumBands);
    int doy = 30;
    for (int t = 0; t < row.valid_len; ++t) {
      for (int b = 0; b < kNumBands; ++b) row.bands(t, b) = rng.normal(0.0, 1.0);
      row.dates.push_back(Date{2018, doy});
      doy += 5;
    }
    batch.rows.push_back(std::move(row));
  }
  return batch;
}

void BM_Forward(benchmark::State& state) {
  const int t_max = static_cast<int>(state.range(0));
  const ModelConfig mc = bench_config(t_max);
  Rng rng(1);
  const ParameterSet params = ParameterSet::init(mc, rng);
  const PaddedBatch batch = bench_batch(rng, 32, t_max, mc.num_classes);
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward(batch, params, false).logits);
  }
}
BENCHMARK(BM_Forward)->Arg(16)->Arg(49)->Arg(96);

void BM_Gradients(benchmark::State& state) {
  const int t_max = static_cast<int>(state.range(0));
  const ModelConfig mc = bench_config(t_max);
  Rng rng(1);
  const ParameterSet params = ParameterSet::init(mc, rng);
  const PaddedBatch batch = bench_batch(rng, 32, t_max, mc.num_classes);
  for (auto _ : state) {
    benchmark::DoNotOptimize(loss_gradients(batch, params, 2.0).loss);
  }
}
BENCHMARK(BM_Gradients)->Arg(16)->Arg(49);

void BM_ImportanceSummaries(benchmark::State& state) {
  const int t_max = 49;
  const ModelConfig mc = bench_config(t_max);
  Rng rng(1);
  const ParameterSet params = ParameterSet::init(mc, rng);
  const PaddedBatch batch = bench_batch(rng, 64, t_max, mc.num_classes);
  const ForwardOutput out = forward(batch, params, true);
  for (auto _ : state) {
    std::vector<ImportanceTable> tables;
    tables.reserve(out.records.size());
    for (const AttentionRecord& rec : out.records) {
      tables.push_back(parcel_date_importance(rec));
    }
    benchmark::DoNotOptimize(global_date_importance(tables).values.size());
  }
}
BENCHMARK(BM_ImportanceSummaries);

} // namespace

BENCHMARK_MAIN();
