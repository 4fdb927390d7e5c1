#include <benchmark/benchmark.h>

#include <attnlab/attention.hpp>
#include <attnlab/constructions.hpp>
#include <attnlab/random.hpp>

#include "support.hpp"

using namespace attnlab;
using namespace testing_support;

namespace {

const PrecisionConfig kCfg{12, 4};

Sequence bench_sequence(std::size_t n, std::size_t width) {
  Rng rng(42);
  return random_sequence(rng, n, width, kCfg, 16);
}

LayerConfig bench_layer(LayerKind kind, int d) {
  Rng rng(7);
  auto cfg = random_layer(rng, kind, 1, d, kCfg, 8);
  cfg.feature_map = "relu_plus_one";
  cfg.sparse.B = 4;
  cfg.sparse.k = 2;
  cfg.sparse.lambda = Rational(1, 2);
  return cfg;
}

void BM_FullLayer(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto cfg = bench_layer(LayerKind::kFull, 4);
  const auto seq = bench_sequence(n, 4);
  for (auto _ : state) benchmark::DoNotOptimize(full_layer(seq, cfg));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_FullLayer)->RangeMultiplier(2)->Range(8, 64)->Complexity();

void BM_LinearRecurrent(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto cfg = bench_layer(LayerKind::kLinear, 4);
  const auto seq = bench_sequence(n, 4);
  for (auto _ : state) benchmark::DoNotOptimize(linear_layer(seq, cfg, LinearMode::kRecurrent));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_LinearRecurrent)->RangeMultiplier(2)->Range(8, 128)->Complexity();

void BM_LinearDirect(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto cfg = bench_layer(LayerKind::kLinear, 4);
  const auto seq = bench_sequence(n, 4);
  for (auto _ : state) benchmark::DoNotOptimize(linear_layer(seq, cfg, LinearMode::kDirect));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_LinearDirect)->RangeMultiplier(2)->Range(8, 64)->Complexity();

void BM_LogLinear(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto cfg = bench_layer(LayerKind::kLogLinear, 4);
  const auto seq = bench_sequence(n, 4);
  for (auto _ : state) benchmark::DoNotOptimize(loglinear_layer(seq, cfg));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_LogLinear)->RangeMultiplier(2)->Range(8, 128)->Complexity();

void BM_SparseLayer(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto cfg = bench_layer(LayerKind::kSparse, 4);
  const auto seq = bench_sequence(n, 4);
  for (auto _ : state) benchmark::DoNotOptimize(sparse_layer(seq, cfg));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SparseLayer)->RangeMultiplier(2)->Range(8, 64)->Complexity();

void BM_SolveEva(benchmark::State& state) {
  GenParams gp;
  gp.n = static_cast<int>(state.range(0));
  const auto inst = std::get<EvaInstance>(gen_instance(TaskKind::kEva, gp, 1));
  for (auto _ : state) benchmark::DoNotOptimize(solve_eva(inst));
}
BENCHMARK(BM_SolveEva)->RangeMultiplier(4)->Range(8, 256);

void BM_ExpRounded(benchmark::State& state) {
  const Rational x(37, 8);
  const int bits = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(exp_rounded(x, bits));
}
BENCHMARK(BM_ExpRounded)->Arg(24)->Arg(64)->Arg(256);

}  // namespace
