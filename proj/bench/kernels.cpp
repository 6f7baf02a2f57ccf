// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <numeric>

#include "citeweave/augment.hpp"
#include "citeweave/community.hpp"
#include "citeweave/knn.hpp"
#include "citeweave/synth.hpp"

using namespace citeweave;

namespace {

const SynthCorpus& corpus() {
  static const SynthCorpus c = [] {
    PlantedSpec spec;
    spec.community_sizes = {3000, 2000};
    spec.p_intra = 0.004;
    spec.p_inter = 0.0002;
    spec.embed_dim = 64;
    spec.seed = 11;
    return planted_graph(spec);
  }();
  return c;
}

std::vector<NodeId> all_nodes() {
  std::vector<NodeId> v(corpus().graph.n());
  std::iota(v.begin(), v.end(), NodeId{0});
  return v;
}

std::vector<NodeId> queries(std::size_t count) {
  std::vector<NodeId> q(count);
  std::iota(q.begin(), q.end(), NodeId{0});
  return q;
}

void BM_knn_serial(benchmark::State& state) {
  const auto q = queries(static_cast<std::size_t>(state.range(0)));
  const auto c = all_nodes();
  for (auto _ : state) benchmark::DoNotOptimize(knn_search_serial(q, c, corpus().embeddings, 10));
}

void BM_knn_parallel(benchmark::State& state) {
  const auto q = queries(static_cast<std::size_t>(state.range(0)));
  const auto c = all_nodes();
  for (auto _ : state) benchmark::DoNotOptimize(knn_search(q, c, corpus().embeddings, 10));
}

void BM_weigh_serial(benchmark::State& state) {
  for (auto _ : state)
    benchmark::DoNotOptimize(weight_citation_edges_serial(corpus().graph, corpus().embeddings));
}

void BM_weigh_parallel(benchmark::State& state) {
  for (auto _ : state)
    benchmark::DoNotOptimize(weight_citation_edges(corpus().graph, corpus().embeddings));
}

void BM_kmeans_serial(benchmark::State& state) {
  KMeansConfig cfg;
  cfg.k = static_cast<std::size_t>(state.range(0));
  cfg.seed = 3;
  for (auto _ : state) benchmark::DoNotOptimize(kmeans_serial(corpus().embeddings, cfg));
}

void BM_kmeans_parallel(benchmark::State& state) {
  KMeansConfig cfg;
  cfg.k = static_cast<std::size_t>(state.range(0));
  cfg.seed = 3;
  for (auto _ : state) benchmark::DoNotOptimize(kmeans(corpus().embeddings, cfg));
}

}  // namespace

BENCHMARK(BM_knn_serial)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_knn_parallel)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_weigh_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_weigh_parallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_kmeans_serial)->Arg(2)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_kmeans_parallel)->Arg(2)->Arg(16)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
