#include <benchmark/benchmark.h>

#include "wmfrec/features.hpp"
#include "wmfrec/random.hpp"

namespace {

using namespace wmfrec;

Matrix random_matrix(Index rows, Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m(i) = rng.normal();
  return m;
}

void BM_ObliminRotate(benchmark::State& state) {
  const Matrix loadings = 0.5 * random_matrix(16, state.range(0), 1);
  for (auto _ : state) benchmark::DoNotOptimize(oblimin_rotate(loadings).criterion);
}
BENCHMARK(BM_ObliminRotate)->Arg(3)->Arg(6);

// 16 correlated descriptors per item, standardized once, then the full
// PCA + rotation + score-weight fit.
void BM_FitFactors(benchmark::State& state) {
  const Index items = state.range(0);
  const Matrix raw = random_matrix(items, 3, 2) * random_matrix(3, 16, 3) + 0.5 * random_matrix(items, 16, 4);
  const Matrix x = standardize(raw).standardized;
  for (auto _ : state) benchmark::DoNotOptimize(fit_factors(x, 3).score_weights);
}
BENCHMARK(BM_FitFactors)->Arg(10000)->Arg(200000)->Unit(benchmark::kMillisecond);

}  // namespace
