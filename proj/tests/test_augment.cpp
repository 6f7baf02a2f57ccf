#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <set>

#include "citeweave/augment.hpp"
#include "citeweave/error.hpp"
#include "oracles.hpp"

using namespace citeweave;

namespace {

const AugmentedEdge& find(const AugmentedGraph& g, NodeId u, NodeId v) {
  for (const auto& e : g.edges)
    if (e.u == u && e.v == v) return e;
  throw std::runtime_error("edge not found");
}

}  // namespace

TEST_CASE("select small-cluster nodes") {
  SUBCASE("sizes 10, 5, 3 with threshold 5") {
    std::vector<std::uint32_t> labels;
    for (int i = 0; i < 10; ++i) labels.push_back(0);
    for (int i = 0; i < 5; ++i) labels.push_back(1);
    for (int i = 0; i < 3; ++i) labels.push_back(2);
    const auto s = select_small_cluster_nodes(Partition(labels), 5);
    CHECK(s.size() == 8);
    CHECK(s.front() == 10);
    CHECK(s.back() == 17);
  }
  SUBCASE("single cluster below the threshold selects nothing") {
    CHECK(select_small_cluster_nodes(Partition::whole(50), 10).empty());
  }
  SUBCASE("threshold covering the largest cluster is an error") {
    try {
      select_small_cluster_nodes(Partition({0, 0, 1}), 2);
      FAIL("expected an error");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("threshold selects entire graph") != std::string::npos);
    }
  }
}

TEST_CASE("citation weights are clamped cosines") {
  // Node 1 has cosine 0.8 with node 0, node 2 has cosine -0.2.
  const double s = std::sqrt(1.0 - 0.04);
  const EmbeddingMatrix m = normalize_rows(EmbeddingMatrix(3, 2, {1.0f, 0.0f, 0.8f, 0.6f, -0.2f, static_cast<float>(s)}));
  const CorpusGraph g({"a", "b", "c"}, {{0, 1}, {2, 0}});
  const auto w = weight_citation_edges(g, m);
  REQUIRE(w.size() == 2);
  CHECK(*w[0].w_textual == doctest::Approx(0.8).epsilon(1e-6));
  CHECK(*w[1].w_textual == 0.0);
  const auto serial = weight_citation_edges_serial(g, m);
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(*w[i].w_textual == *serial[i].w_textual);
  CHECK_THROWS_AS(weight_citation_edges(g, normalize_rows(EmbeddingMatrix(2, 1, {1, 1}))), ValidationError);
}

TEST_CASE("blend formula examples") {
  const auto g = blend(4, {{2, 3, 0.6}}, {{0, 1, 0.8}}, 0.5);
  CHECK(std::abs(find(g, 0, 1).w_blend - 0.9) <= 1e-12);
  CHECK(std::abs(find(g, 2, 3).w_blend - 0.3) <= 1e-12);
  CHECK(find(g, 2, 3).w_citing == 0.0);
  CHECK(find(g, 0, 1).w_citing == 1.0);
  CHECK(find(g, 2, 3).from_knn);
  CHECK(!find(g, 0, 1).from_knn);
}

TEST_CASE("overlap pairs carry both components") {
  const auto g = blend(3, {{1, 0, 0.7}}, {{0, 1, 0.7}, {1, 2, 0.4}}, 0.5);
  CHECK(g.bookkeeping.e_overlap == 1);
  CHECK(g.bookkeeping.e_total == 2);
  CHECK(g.bookkeeping.consistent());
  const auto& e = find(g, 0, 1);
  CHECK(e.from_knn);
  CHECK(e.w_citing == 1.0);
  CHECK(*e.w_textual == 0.7);
}

TEST_CASE("negative textual scores are clamped") {
  const auto g = blend(2, {{0, 1, -0.3}}, {}, 1.0);
  CHECK(*g.edges[0].w_textual == 0.0);
  CHECK(g.edges[0].w_blend == 0.0);
}

TEST_CASE("blend argument errors") {
  CHECK_THROWS_AS(blend(2, {}, {}, -0.1), ValidationError);
  CHECK_THROWS_AS(blend(2, {}, {}, 1.5), ValidationError);
  CHECK_THROWS_AS(blend(2, {{0, 1, 0.2}, {1, 0, 0.2}}, {}, 0.5), ValidationError);
  CHECK_THROWS_AS(blend(2, {{0, 0, 0.2}}, {}, 0.5), ValidationError);
}

TEST_CASE("large-corpus bookkeeping arithmetic") {
  const Bookkeeping k10{4150852, 5815, 1376, 4155291};
  const Bookkeeping k100{4150852, 72762, 2266, 4221348};
  CHECK(k10.consistent());
  CHECK(k100.consistent());
  CHECK(!Bookkeeping{4150852, 834773, 2526, 4982625}.consistent());
}

TEST_CASE("blend properties on random inputs") {
  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> u(-0.2, 1.0);
  for (int t = 0; t < 40; ++t) {
    const std::size_t n = 10 + gen() % 40;
    std::set<std::pair<NodeId, NodeId>> tp, cp;
    std::vector<TextualEdge> textual;
    std::vector<CitingEdge> citing;
    for (int i = 0; i < 60; ++i) {
      NodeId a = gen() % n, b = gen() % n;
      if (a == b) continue;
      if (a > b) std::swap(a, b);
      if (gen() % 2) {
        if (tp.emplace(a, b).second) textual.push_back({a, b, u(gen)});
      } else if (cp.emplace(a, b).second) {
        citing.push_back({a, b, std::max(0.0, u(gen))});
      }
    }
    const double alpha = (gen() % 11) / 10.0;
    const auto g = blend(n, textual, citing, alpha);
    CHECK(g.bookkeeping.consistent());
    std::size_t overlap = 0;
    for (const auto& p : tp) overlap += cp.count(p);
    CHECK(g.bookkeeping.e_overlap == overlap);
    std::set<std::pair<NodeId, NodeId>> all;
    for (const auto& e : g.edges) {
      CHECK(e.u < e.v);
      CHECK(all.emplace(e.u, e.v).second);
      CHECK((e.w_textual.has_value() || e.w_citing == 1.0));
      CHECK(e.w_blend >= 0.0);
      CHECK(e.w_blend <= 1.0);
      CHECK(std::abs(e.w_blend - (alpha * e.w_textual.value_or(0.0) + (1 - alpha) * e.w_citing)) <= 1e-9);
    }
    CHECK(std::includes(all.begin(), all.end(), cp.begin(), cp.end()));
    CHECK(all.size() == g.bookkeeping.e_total);
  }
}

TEST_CASE("alpha 0 and 1 reproduce the components bitwise") {
  std::vector<TextualEdge> textual = {{0, 1, 0.123456789}, {2, 3, 0.987654321}};
  std::vector<CitingEdge> citing = {{0, 1, 0.123456789}, {1, 2, 0.333333333}};
  const auto g0 = blend(4, textual, citing, 0.0);
  const auto g1 = blend(4, textual, citing, 1.0);
  for (std::size_t i = 0; i < g0.edges.size(); ++i) {
    CHECK(std::bit_cast<std::uint64_t>(g0.edges[i].w_blend) == std::bit_cast<std::uint64_t>(g0.edges[i].w_citing));
    CHECK(std::bit_cast<std::uint64_t>(g1.edges[i].w_blend) ==
          std::bit_cast<std::uint64_t>(g1.edges[i].w_textual.value_or(0.0)));
  }
}

TEST_CASE("views") {
  const auto g = blend(4, {{0, 1, 0.5}, {2, 3, 0.0}}, {{0, 1, 0.5}, {1, 2, 0.2}}, 1.0);
  SUBCASE("weighted view drops zero weights") {
    const auto w = weighted_view(g);
    CHECK(w.size() == 2);
    for (const auto& e : w) CHECK(e.w > 0.0);
  }
  SUBCASE("unweighted view counts overlap once") {
    const auto u = unweighted_view(g);
    CHECK(u.size() == 3);
    for (const auto& e : u) CHECK(e.w == 1.0);
    const auto twice = unweighted_view(g, true);
    CHECK(twice[0].w == 2.0);
  }
  SUBCASE("no textual edges gives the citing pairs") {
    const CorpusGraph graph({"a", "b", "c"}, {{0, 1}, {2, 1}});
    const auto u = unweighted_view(blend(3, {}, unweighted_citing(graph), 0.5));
    REQUIRE(u.size() == 2);
    CHECK((u[0].u == 0 && u[0].v == 1 && u[1].u == 1 && u[1].v == 2));
  }
}

TEST_CASE("augmented TSV round trip") {
  oracle::TempDir dir("augment_tsv");
  const CorpusGraph graph({"a", "b", "c"}, {{0, 1}});
  const auto g = blend(3, {{1, 2, 0.25}}, {{0, 1, std::nullopt}}, 0.5);
  write_augmented_tsv(dir / "g.tsv", g, graph);
  CHECK(oracle::read_text(dir / "g.tsv") == "a\tb\t-\t1\t0.500000\nb\tc\t0.250000\t0\t0.125000\n");
  const auto pairs = read_augmented_pairs(dir / "g.tsv", graph, true);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[1].w == doctest::Approx(0.125));
  CHECK(read_augmented_pairs(dir / "g.tsv", graph, false)[1].w == 1.0);
  CHECK(bookkeeping_json(g).find("\"e_total\"") != std::string::npos);
}
