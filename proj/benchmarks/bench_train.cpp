#include <benchmark/benchmark.h>

#include <vector>

#include "wmfrec/cf.hpp"
#include "wmfrec/random.hpp"

namespace {

using namespace wmfrec;

ConfidenceMatrix synthetic(Index users, Index items, double density, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<WeightedEntry> entries;
  for (Index u = 0; u < users; ++u) {
    for (Index i = 0; i < items; ++i) {
      if (rng.uniform() >= density) continue;
      entries.push_back({u, i, rng.uniform() < 0.6 ? 1.0 : 0.0, confidence(1.0 + rng.below(20), 2.0, 1e-6, 1.0)});
    }
  }
  return ConfidenceMatrix(users, items, entries, 1.0);
}

// One alternating sweep per iteration, content-free and content-aware.
void BM_TrainSweep(benchmark::State& state) {
  const Index n = state.range(0);
  const bool aware = state.range(1) != 0;
  const ConfidenceMatrix data = synthetic(n, n, 0.02, 1);
  Rng rng(2);
  Matrix z(3, n);
  for (Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  Hyperparams p;
  p.rank = 50;
  p.n_iters = 1;
  p.base_confidence = 1.0;
  for (auto _ : state) {
    auto r = aware ? train(data, z, p, 3) : train(data, p, 3);
    benchmark::DoNotOptimize(r.objective_trace);
  }
  state.SetItemsProcessed(state.iterations() * 2 * n);
}
BENCHMARK(BM_TrainSweep)->ArgsProduct({{500, 2000}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_UpdateUser(benchmark::State& state) {
  const Index k = state.range(0);
  const ConfidenceMatrix data = synthetic(100, 5000, 0.02, 4);
  Rng rng(5);
  Matrix h(k, 5000);
  for (Index i = 0; i < h.size(); ++i) h(i) = 0.1 * rng.normal();
  Index u = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(update_user(u, h, data, 1.0));
    u = (u + 1) % 100;
  }
}
BENCHMARK(BM_UpdateUser)->Arg(10)->Arg(50)->Arg(100);

}  // namespace
