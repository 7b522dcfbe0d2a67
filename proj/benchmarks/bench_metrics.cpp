#include <benchmark/benchmark.h>

#include <vector>

#include "ffoundry/audit.hpp"
#include "ffoundry/dedup.hpp"
#include "ffoundry/metrics.hpp"
#include "ffoundry/rng.hpp"

using namespace ffoundry;

namespace {

void make_instance(std::size_t n, std::vector<double>& p, std::vector<int>& o) {
  Rng rng(7);
  p.resize(n);
  o.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = rng.next_double();
    o[i] = rng.next_double() < 0.3 ? 1 : 0;
  }
}

std::vector<EmbeddingVector> make_vectors(std::size_t n, std::size_t dim) {
  Rng rng(11);
  std::vector<EmbeddingVector> vs(n);
  for (std::size_t i = 0; i < n; ++i) {
    vs[i].question_id = "q" + std::to_string(i);
    vs[i].values.resize(dim);
    double norm = 0.0;
    for (auto& x : vs[i].values) {
      x = static_cast<float>(rng.next_gaussian());
      norm += static_cast<double>(x) * x;
    }
    for (auto& x : vs[i].values) x = static_cast<float>(x / std::sqrt(norm));
  }
  return vs;
}

}  // namespace

static void BM_BrierDecompose(benchmark::State& state) {
  std::vector<double> p;
  std::vector<int> o;
  make_instance(static_cast<std::size_t>(state.range(0)), p, o);
  for (auto _ : state) {
    auto result = metrics::decompose(p, o, 10);
    benchmark::DoNotOptimize(result);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BrierDecompose)->Arg(100)->Arg(1500)->Arg(15000);

static void BM_BootstrapCI(benchmark::State& state) {
  std::vector<metrics::ScoredQuestion> scores;
  Rng rng(3);
  for (int i = 0; i < state.range(0); ++i)
    scores.push_back({"q" + std::to_string(i), rng.next_double()});
  for (auto _ : state) {
    auto iv = metrics::bootstrap_ci(scores, 10000, 0.95, 9);
    benchmark::DoNotOptimize(iv);
  }
}
BENCHMARK(BM_BootstrapCI)->Arg(100)->Arg(1500)->Unit(benchmark::kMillisecond);

static void BM_BetaInterval(benchmark::State& state) {
  for (auto _ : state) {
    auto ci = metrics::beta_interval(3, 100, 0.95);
    benchmark::DoNotOptimize(ci);
  }
}
BENCHMARK(BM_BetaInterval);

static void BM_DbscanCluster(benchmark::State& state) {
  auto vs = make_vectors(static_cast<std::size_t>(state.range(0)), 64);
  ClusterParams params;
  for (auto _ : state) {
    auto assign = cluster(vs, params);
    benchmark::DoNotOptimize(assign);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_DbscanCluster)->Arg(100)->Arg(400)->Arg(1500)
    ->Unit(benchmark::kMillisecond)->Complexity(benchmark::oNSquared);

static void BM_KMeans(benchmark::State& state) {
  auto vs = make_vectors(static_cast<std::size_t>(state.range(0)), 64);
  for (auto _ : state) {
    auto assign = kmeans_cluster(vs, 12, 5);
    benchmark::DoNotOptimize(assign);
  }
}
BENCHMARK(BM_KMeans)->Arg(400)->Arg(1500)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
