#include <benchmark/benchmark.h>

#include "paralesn/reservoir.hpp"
#include "paralesn/rng.hpp"
#include "paralesn/scan.hpp"

using namespace paralesn;

namespace {

AffineSequence random_sequence(std::size_t T, std::size_t n) {
  RngStream rng(RngSpec{11});
  AffineSequence seq{sample_uniform_complex(1, n, rng), sample_uniform_complex(T, n, rng)};
  for (auto& g : seq.gains.flat()) g *= 0.5;
  return seq;
}

RealMatrix random_inputs(std::size_t T, std::size_t n) {
  RngStream rng(RngSpec{12});
  RealMatrix x(T, n);
  for (auto& v : x.flat()) v = rng.uniform(-1.0, 1.0);
  return x;
}

void BM_ScanSequential(benchmark::State& state) {
  const auto seq = random_sequence(static_cast<std::size_t>(state.range(0)), 128);
  const ComplexVector h0(128);
  for (auto _ : state) benchmark::DoNotOptimize(scan_sequential(seq, h0));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ScanParallel(benchmark::State& state) {
  const auto T = static_cast<std::size_t>(state.range(0));
  const auto seq = random_sequence(T, 128);
  const ComplexVector h0(128);
  for (auto _ : state) benchmark::DoNotOptimize(scan_parallel(seq, h0, default_chunk_size(T)));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

// Range: T, units. Full forward pass including drive and mixing.
void BM_DeepForward(benchmark::State& state) {
  DeepHyperparams hp;
  hp.total_units = static_cast<std::size_t>(state.range(1));
  RngStream rng(RngSpec{13});
  const auto model = DeepParalEsn::sample(hp, 1, rng);
  const auto x = random_inputs(static_cast<std::size_t>(state.range(0)), 1);
  ForwardOptions opts;
  opts.mode = state.range(2) ? ScanMode::kParallel : ScanMode::kSequential;
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(x, opts));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_ScanSequential)->RangeMultiplier(4)->Range(1 << 10, 1 << 16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScanParallel)->RangeMultiplier(4)->Range(1 << 10, 1 << 16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DeepForward)
    ->ArgsProduct({{1 << 12, 1 << 14}, {128, 512}, {0, 1}})
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
