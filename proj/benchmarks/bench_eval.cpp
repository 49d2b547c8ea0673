#include <benchmark/benchmark.h>

#include <cstdint>
#include <numeric>
#include <vector>

#include "wmfrec/eval.hpp"
#include "wmfrec/ingest.hpp"
#include "wmfrec/random.hpp"

namespace {

using namespace wmfrec;

void BM_Ndcg(benchmark::State& state) {
  Rng rng(1);
  std::vector<std::uint8_t> rel(static_cast<std::size_t>(state.range(0)));
  for (auto& r : rel) r = rng.uniform() < 0.05 ? 1 : 0;
  rel[0] = 1;
  for (auto _ : state) benchmark::DoNotOptimize(ndcg(rel));
}
BENCHMARK(BM_Ndcg)->Arg(100)->Arg(10000);

void BM_RankCandidates(benchmark::State& state) {
  std::vector<Index> candidates(static_cast<std::size_t>(state.range(0)));
  std::iota(candidates.begin(), candidates.end(), Index{0});
  const RandomScorer scorer(7);
  const ScoreFn fn = [&](Index u, Index i) { return scorer.score(u, i); };
  for (auto _ : state) benchmark::DoNotOptimize(rank_candidates(fn, 0, candidates));
}
BENCHMARK(BM_RankCandidates)->Arg(1000)->Arg(10000);

// Whole in-matrix evaluation with a random scorer on a 1000 x 2000 split.
void BM_EvaluateInMatrix(benchmark::State& state) {
  Rng rng(2);
  PlaycountMatrix m;
  for (Index u = 0; u < 1000; ++u) m.user_ids.push_back("u" + std::to_string(u));
  for (Index i = 0; i < 2000; ++i) m.item_ids.push_back("s" + std::to_string(i));
  for (Index u = 0; u < 1000; ++u) {
    for (Index i = 0; i < 2000; ++i) {
      if (rng.uniform() < 0.01) m.entries.push_back({u, i, static_cast<std::uint32_t>(1 + rng.below(10))});
    }
  }
  SplitConfig cfg;
  const InteractionSet split = make_splits(binarize(m), m, cfg);
  const RandomScorer scorer(3);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(scorer, split, Task::kInMatrix).mean);
}
BENCHMARK(BM_EvaluateInMatrix)->Unit(benchmark::kMillisecond);

}  // namespace
