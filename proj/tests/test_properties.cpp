// Randomized invariants that cut across modules.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "citeweave/augment.hpp"
#include "citeweave/community.hpp"
#include "citeweave/knn.hpp"
#include "citeweave/synth.hpp"
#include "oracles.hpp"

using namespace citeweave;

namespace {

std::set<std::set<NodeId>> as_sets(const Partition& p, const std::vector<NodeId>& relabel = {}) {
  std::set<std::set<NodeId>> out;
  for (const auto& members : p.members()) {
    std::set<NodeId> s;
    for (const auto v : members) s.insert(relabel.empty() ? v : relabel[v]);
    out.insert(s);
  }
  return out;
}

}  // namespace

TEST_CASE("canonical partitions") {
  std::mt19937_64 gen(1);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 1 + gen() % 60;
    std::vector<std::uint32_t> label(n);
    for (auto& l : label) l = static_cast<std::uint32_t>(gen() % 9) * 7;
    const Partition p(label);
    std::size_t total = 0;
    for (std::size_t c = 0; c < p.cluster_count(); ++c) {
      total += p.sizes()[c];
      if (c > 0) CHECK(p.sizes()[c] <= p.sizes()[c - 1]);
    }
    CHECK(total == n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) CHECK((label[i] == label[j]) == (p[i] == p[j]));
  }
}

TEST_CASE("Leiden communities are connected and never worse than singletons") {
  std::mt19937_64 gen(2);
  for (int t = 0; t < 60; ++t) {
    const std::size_t n = 10 + gen() % 120;
    const double p = 0.02 + (gen() % 100) / 1000.0;
    auto edges = oracle::random_graph(n, p, gen);
    for (auto& e : edges) e.w = 0.05 + (gen() % 100) / 100.0;
    QualityConfig cfg;
    cfg.function = t % 3 == 0 ? QualityFunction::Cpm : QualityFunction::RbModularity;
    cfg.resolution = cfg.function == QualityFunction::Cpm ? 0.05 + (gen() % 10) / 20.0 : 0.1 + (gen() % 20) / 10.0;
    cfg.use_weights = t % 2 == 0;
    cfg.seed = gen();
    const auto r = leiden(edges, n, cfg);
    for (const auto& members : r.partition.members()) CHECK(oracle::connected(edges, members));
    CHECK(r.quality >= quality(edges, n, Partition::singletons(n), cfg) - 1e-12);
  }
}

TEST_CASE("relabeling nodes relabels the planted partition Leiden finds") {
  PlantedSpec spec;
  spec.community_sizes = {40, 30, 30};
  spec.p_intra = 0.4;
  spec.p_inter = 0.01;
  const auto c = planted_graph(spec);
  const auto base = unit_pairs(c.graph.undirected_edges());
  QualityConfig cfg;
  cfg.resolution = 1.0;
  cfg.seed = 3;
  const auto r = leiden(base, c.graph.n(), cfg);
  REQUIRE(r.partition == Partition(c.community));

  std::mt19937_64 gen(4);
  for (int t = 0; t < 5; ++t) {
    std::vector<NodeId> perm(c.graph.n());
    std::iota(perm.begin(), perm.end(), NodeId{0});
    std::shuffle(perm.begin(), perm.end(), gen);
    std::vector<WeightedPair> moved;
    for (const auto& e : base) moved.push_back({std::min(perm[e.u], perm[e.v]), std::max(perm[e.u], perm[e.v])});
    std::sort(moved.begin(), moved.end(), [](auto& a, auto& b) { return std::tie(a.u, a.v) < std::tie(b.u, b.v); });
    const auto rp = leiden(moved, c.graph.n(), cfg);
    CHECK(as_sets(rp.partition) == as_sets(r.partition, perm));
  }
}

TEST_CASE("zero-weight pairs do not change the weighted clustering") {
  PlantedSpec spec;
  spec.community_sizes = {50, 50};
  spec.p_intra = 0.2;
  const auto c = planted_graph(spec);
  // Textual-only pairs between random nodes, then alpha = 0 gives them weight 0.
  std::mt19937_64 gen(5);
  std::vector<TextualEdge> textual;
  std::set<std::pair<NodeId, NodeId>> seen;
  for (int i = 0; i < 80; ++i) {
    NodeId a = gen() % 100, b = gen() % 100;
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    if (seen.emplace(a, b).second) textual.push_back({a, b, 0.5});
  }
  const auto g = blend(100, textual, unweighted_citing(c.graph), 0.0);
  QualityConfig cfg;
  cfg.resolution = 1.0;
  cfg.seed = 8;
  CHECK(leiden(weighted_view(g), 100, cfg).partition ==
        leiden(unit_pairs(c.graph.undirected_edges()), 100, cfg).partition);
}

TEST_CASE("parallel kernels equal their serial references") {
  std::mt19937_64 gen(6);
  PlantedSpec spec;
  spec.community_sizes = {150, 150};
  spec.p_intra = 0.05;
  spec.embed_dim = 12;
  const auto c = planted_graph(spec);
  for (const int w : {1, 2, 4}) {
    const auto a = weight_citation_edges(c.graph, c.embeddings, w);
    const auto b = weight_citation_edges_serial(c.graph, c.embeddings);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(*a[i].w_textual == *b[i].w_textual);

    std::vector<NodeId> q;
    for (NodeId i = 0; i < 300; i += 7) q.push_back(i);
    std::vector<NodeId> all(300);
    std::iota(all.begin(), all.end(), NodeId{0});
    CHECK(knn_search(q, all, c.embeddings, 9, w).lists == knn_search_serial(q, all, c.embeddings, 9).lists);

    KMeansConfig kc;
    kc.k = 3;
    kc.seed = 2;
    kc.workers = w;
    const auto km = kmeans(c.embeddings, kc);
    const auto ks = kmeans_serial(c.embeddings, kc);
    CHECK(km.partition == ks.partition);
    CHECK(km.inertia_trace == ks.inertia_trace);
  }
}

TEST_CASE("k-means inertia never increases") {
  std::mt19937_64 gen(7);
  for (int t = 0; t < 15; ++t) {
    const auto m = oracle::random_unit_rows(100 + gen() % 200, 2 + gen() % 8, gen);
    KMeansConfig cfg;
    cfg.k = 2 + gen() % 8;
    cfg.seed = gen();
    const auto r = kmeans(m, cfg);
    for (std::size_t i = 1; i < r.inertia_trace.size(); ++i) CHECK(r.inertia_trace[i] <= r.inertia_trace[i - 1] + 1e-9);
  }
}
