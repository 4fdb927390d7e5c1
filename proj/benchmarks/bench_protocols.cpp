#include <benchmark/benchmark.h>

#include <attnlab/comm.hpp>
#include <attnlab/params.hpp>

using namespace attnlab;

namespace {

void BM_FindCollisionEva(benchmark::State& state) {
  ProtocolSpec spec;
  spec.kind = ProtocolKind::kRnnEva;
  spec.n = static_cast<int>(state.range(0));
  spec.p = 4;
  spec.message_bits = 4;
  const auto bundle = random_hash_strategy(spec, 1);
  for (auto _ : state) benchmark::DoNotOptimize(find_collision(spec, bundle));
}
BENCHMARK(BM_FindCollisionEva)->Arg(3)->Arg(4);

void BM_SparseAttack(benchmark::State& state) {
  ProtocolSpec spec;
  spec.kind = ProtocolKind::kSparseTwoSum;
  spec.n = 8;
  spec.B = 4;
  spec.message_bits = static_cast<std::size_t>(state.range(0));
  const auto bundle = bitmask_strategy(spec);
  for (auto _ : state) benchmark::DoNotOptimize(find_sparse_attack(spec, bundle));
}
BENCHMARK(BM_SparseAttack)->Arg(4)->Arg(7);

void BM_DeriveParams(benchmark::State& state) {
  const int L = static_cast<int>(state.range(0));
  for (auto _ : state) {
    const auto ps = derive_params(1, 2, 1, L);
    benchmark::DoNotOptimize(check_hybrid_budget(ps, default_hybrid_schedule(L)));
  }
}
BENCHMARK(BM_DeriveParams)->Arg(2)->Arg(3);

void BM_VerifyEqualities(benchmark::State& state) {
  const auto ps = derive_params(1, 2, 1, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(verify_param_equalities(ps));
}
BENCHMARK(BM_VerifyEqualities)->Arg(2)->Arg(3);

}  // namespace

BENCHMARK_MAIN();
