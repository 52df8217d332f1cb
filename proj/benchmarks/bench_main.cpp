#include <random>

#include <benchmark/benchmark.h>

#include "cpforge/complexity.hpp"
#include "cpforge/kernels_hsic.hpp"
#include "cpforge/search.hpp"

namespace {

using namespace cpforge;

Dataset random_dataset(std::size_t m, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Matrix x(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
  std::vector<int> y(m);
  for (std::size_t i = 0; i < m; ++i) {
    y[i] = i % 2 == 0 ? 1 : -1;
    for (std::size_t j = 0; j < d; ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = g(rng) + 0.5 * y[i];
  }
  std::vector<std::string> names;
  for (std::size_t j = 0; j < d; ++j) names.push_back("f" + std::to_string(j));
  return Dataset::from_unsorted(std::move(x), std::move(y), std::move(names));
}

// One full scan of block-class transposition deltas.
void BM_HsicDeltaScan(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const Dataset ds = random_dataset(m, 4, 1);
  const auto split = FeatureSplit::first_half(ds.d());
  HsicObjective obj(gaussian_kernel(ds, split.anchor()).mat, gaussian_kernel(ds, split.shuffle()).mat);
  SearchConfig cfg;
  Rng rng(0);
  const auto pairs = candidate_pairs(ds.labels(), cfg, rng);
  for (auto _ : state) benchmark::DoNotOptimize(best_candidate(obj, pairs));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * pairs.size()));
}
BENCHMARK(BM_HsicDeltaScan)->Arg(50)->Arg(100)->Arg(200);

// Ten greedy iterations of the HSIC search, without p-values or bounds.
void BM_GreedyIterations(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const Dataset ds = random_dataset(m, 4, 2);
  const auto split = FeatureSplit::first_half(ds.d());
  const Matrix ku = gaussian_kernel(ds, split.anchor()).mat;
  const Matrix kv = gaussian_kernel(ds, split.shuffle()).mat;
  SearchConfig cfg;
  cfg.iterations = 10;
  cfg.pvalue_every = 0;
  cfg.record_rcp = false;
  for (auto _ : state) {
    HsicObjective obj(ku, kv);
    benchmark::DoNotOptimize(crossover_learn(ds, split, cfg, obj));
  }
}
BENCHMARK(BM_GreedyIterations)->Arg(100)->Arg(200);

void BM_RcpExact(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const Dataset ds = random_dataset(m, 4, 3);
  const auto split = FeatureSplit::first_half(ds.d());
  std::vector<std::size_t> src(m);
  for (std::size_t i = 0; i < m; ++i) src[i] = (i + 2) % m;
  const Matrix deltas = shuffle_differences(ds, split, Permutation(src));
  for (auto _ : state) benchmark::DoNotOptimize(rcp_exact_linear(deltas, 1.0));
}
BENCHMARK(BM_RcpExact)->Arg(12)->Arg(16)->Arg(20);

}  // namespace
BENCHMARK_MAIN();
