#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "citeweave/community.hpp"
#include "citeweave/error.hpp"
#include "oracles.hpp"

using namespace citeweave;

namespace {

// Triangles {0,1,2} and {3,4,5} joined by the bridge 2-3.
std::vector<WeightedPair> two_triangles() {
  return {{0, 1}, {0, 2}, {1, 2}, {3, 4}, {3, 5}, {4, 5}, {2, 3}};
}

QualityConfig cpm(double gamma) {
  QualityConfig q;
  q.function = QualityFunction::Cpm;
  q.resolution = gamma;
  return q;
}

QualityConfig rb(double gamma, std::uint64_t seed = 0) {
  QualityConfig q;
  q.resolution = gamma;
  q.seed = seed;
  return q;
}

}  // namespace

TEST_CASE("partition canonical order") {
  const Partition p({7, 3, 3, 9, 9, 9});
  CHECK(p.assignment() == std::vector<ClusterId>{2, 1, 1, 0, 0, 0});
  CHECK(p.sizes() == std::vector<std::size_t>{3, 2, 1});
  const Partition tie({5, 4, 4, 5});
  CHECK(tie.assignment() == std::vector<ClusterId>{0, 1, 1, 0});
  CHECK(Partition::singletons(3).cluster_count() == 3);
  CHECK(Partition::whole(3).sizes() == std::vector<std::size_t>{3});
  CHECK(Partition({1, 0}) == Partition({0, 1}));
}

TEST_CASE("quality closed forms") {
  const auto edges = two_triangles();
  SUBCASE("RB all-in-one is 1 - gamma") {
    for (const double g : {0.05, 0.5, 1.0, 2.0})
      CHECK(std::abs(quality(edges, 6, Partition::whole(6), rb(g)) - (1.0 - g)) <= 1e-12);
  }
  SUBCASE("CPM singletons are exactly zero") { CHECK(quality(edges, 6, Partition::singletons(6), cpm(0.7)) == 0.0); }
  SUBCASE("CPM hand values") {
    CHECK(quality(edges, 6, Partition({0, 0, 0, 1, 1, 1}), cpm(1.0)) == doctest::Approx(0.0));
    CHECK(quality(edges, 6, Partition::whole(6), cpm(1.0)) == doctest::Approx(-8.0));
  }
  SUBCASE("edgeless RB is zero") { CHECK(quality({}, 4, Partition::whole(4), rb(1.0)) == 0.0); }
  SUBCASE("matches the dense oracle") {
    std::mt19937_64 gen(9);
    for (int t = 0; t < 50; ++t) {
      const std::size_t n = 2 + gen() % 8;
      auto e = oracle::random_graph(n, 0.5, gen);
      for (auto& x : e) x.w = 0.1 + (gen() % 100) / 50.0;
      std::vector<std::uint32_t> label(n);
      for (auto& l : label) l = static_cast<std::uint32_t>(gen() % 3);
      for (auto cfg : {rb(0.3 + t * 0.01), cpm(0.2 + t * 0.01)}) {
        for (const bool w : {true, false}) {
          cfg.use_weights = w;
          CHECK(quality(e, n, Partition(label), cfg) == doctest::Approx(oracle::quality(e, n, label, cfg)).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("weight scaling") {
  auto edges = two_triangles();
  const Partition p({0, 0, 0, 1, 1, 1});
  const double rb_before = quality(edges, 6, p, rb(0.8));
  const double cpm_before = quality(edges, 6, p, cpm(0.5));
  for (auto& e : edges) e.w *= 3.0;
  CHECK(quality(edges, 6, p, rb(0.8)) == doctest::Approx(rb_before).epsilon(1e-12));
  // Internal weight triples, so CPM with gamma scaled by the same factor triples.
  CHECK(quality(edges, 6, p, cpm(1.5)) == doctest::Approx(3.0 * cpm_before).epsilon(1e-12));
}

TEST_CASE("Leiden on two triangles with a bridge, CPM 1") {
  // Triangles, singletons and the bridge pair all reach 0 here, so only the value is pinned.
  const auto r = leiden(two_triangles(), 6, cpm(1.0));
  const Partition triangles({0, 0, 0, 1, 1, 1});
  const auto best = brute_force_best_partition(two_triangles(), 6, cpm(1.0));
  CHECK(quality(two_triangles(), 6, triangles, cpm(1.0)) == doctest::Approx(0.0));
  CHECK(quality(two_triangles(), 6, best, cpm(1.0)) == doctest::Approx(0.0));
  CHECK(quality(two_triangles(), 6, r.partition, cpm(1.0)) == doctest::Approx(0.0));
  CHECK(quality(two_triangles(), 6, Partition::whole(6), cpm(1.0)) == doctest::Approx(-8.0));
}

TEST_CASE("Leiden on an edgeless graph") {
  const auto r = leiden({}, 4, rb(1.0));
  CHECK(r.partition == Partition::singletons(4));
}

TEST_CASE("Leiden keeps isolated nodes alone") {
  const auto r = leiden({{0, 1}, {1, 2}, {0, 2}}, 5, rb(0.5));
  CHECK(r.partition[3] != r.partition[4]);
  CHECK(r.partition.sizes() == std::vector<std::size_t>{3, 1, 1});
}

TEST_CASE("Leiden input validation") {
  CHECK_THROWS_AS(leiden({{0, 0}}, 2, rb(1.0)), ValidationError);
  CHECK_THROWS_AS(leiden({{0, 1}, {0, 1}}, 2, rb(1.0)), ValidationError);
  CHECK_THROWS_AS(leiden({{0, 1, 0.0}}, 2, rb(1.0)), ValidationError);
  CHECK_THROWS_AS(leiden({{0, 1, -1.0}}, 2, rb(1.0)), ValidationError);
  auto unweighted = rb(1.0);
  unweighted.use_weights = false;
  CHECK_NOTHROW(leiden({{0, 1, 0.0}}, 2, unweighted));
  CHECK_THROWS_AS(leiden({{0, 1}}, 2, rb(0.0)), ValidationError);
  auto bad = rb(1.0);
  bad.max_passes = 0;
  CHECK_THROWS_AS(leiden({{0, 1}}, 2, bad), ValidationError);
  bad = rb(1.0);
  bad.restarts = 0;
  CHECK_THROWS_AS(leiden({{0, 1}}, 2, bad), ValidationError);
}

TEST_CASE("restarts never lose quality and keep the first run on ties") {
  std::mt19937_64 gen(31);
  for (int t = 0; t < 30; ++t) {
    const auto e = oracle::random_graph(12, 0.3, gen);
    auto once = rb(1.0, t);
    auto many = once;
    many.restarts = 8;
    const auto a = leiden(e, 12, once);
    const auto b = leiden(e, 12, many);
    CHECK(b.quality >= a.quality);
    if (b.quality == a.quality) CHECK(b.partition == a.partition);
  }
}

TEST_CASE("a six-node path reaches the two triples") {
  // Greedy moves with fixed tie order always end in three pairs (0.26).
  const std::vector<WeightedPair> path{{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}};
  auto cfg = rb(1.0, 5);
  cfg.restarts = 20;
  const auto r = leiden(path, 6, cfg);
  CHECK(r.quality == doctest::Approx(0.3));
  CHECK(r.partition == Partition({0, 0, 0, 1, 1, 1}));
}

TEST_CASE("Leiden trace is monotone and starts at singletons") {
  std::mt19937_64 gen(12);
  for (int t = 0; t < 20; ++t) {
    const auto e = oracle::random_graph(40, 0.1, gen);
    const auto cfg = rb(0.5, t);
    const auto r = leiden(e, 40, cfg);
    REQUIRE(!r.trace.empty());
    CHECK(r.trace.front() == doctest::Approx(quality(e, 40, Partition::singletons(40), cfg)));
    for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] >= r.trace[i - 1] - 1e-12);
    CHECK(r.quality == doctest::Approx(quality(e, 40, r.partition, cfg)).epsilon(1e-12));
  }
}

TEST_CASE("Leiden is deterministic for a fixed seed") {
  std::mt19937_64 gen(13);
  const auto e = oracle::random_graph(80, 0.06, gen);
  CHECK(leiden(e, 80, rb(0.4, 5)).partition == leiden(e, 80, rb(0.4, 5)).partition);
}

TEST_CASE("brute force small cases") {
  SUBCASE("one edge, CPM 0.5 joins") { CHECK(brute_force_best_partition({{0, 1}}, 2, cpm(0.5)) == Partition::whole(2)); }
  SUBCASE("one edge, CPM 2 splits") { CHECK(brute_force_best_partition({{0, 1}}, 2, cpm(2.0)) == Partition::singletons(2)); }
  SUBCASE("empty graph of three") { CHECK(brute_force_best_partition({}, 3, cpm(1.0)) == Partition::singletons(3)); }
  SUBCASE("too large") { CHECK_THROWS_AS(brute_force_best_partition({}, 11, cpm(1.0)), ValidationError); }
  SUBCASE("agrees with the oracle optimum") {
    std::mt19937_64 gen(21);
    for (int t = 0; t < 20; ++t) {
      const std::size_t n = 2 + gen() % 6;
      const auto e = oracle::random_graph(n, 0.5, gen);
      const auto cfg = t % 2 ? rb(0.7) : cpm(0.4);
      const auto best = brute_force_best_partition(e, n, cfg);
      CHECK(quality(e, n, best, cfg) == doctest::Approx(oracle::best_quality(e, n, cfg)).epsilon(1e-12));
    }
  }
}

TEST_CASE("k-means recovers two separated clouds") {
  std::mt19937_64 gen(7);
  std::normal_distribution<float> g(0.0f, 0.1f);
  std::vector<float> data;
  std::vector<std::uint32_t> truth;
  for (int i = 0; i < 200; ++i) {
    const float cx = i < 120 ? 5.0f : -5.0f;
    data.push_back(cx + g(gen));
    data.push_back(g(gen));
    data.push_back(g(gen));
    truth.push_back(i < 120 ? 0 : 1);
  }
  const EmbeddingMatrix m(200, 3, data);
  KMeansConfig cfg;
  cfg.seed = 3;
  const auto r = kmeans(m, cfg);
  CHECK(r.partition == Partition(truth));
  for (std::size_t i = 1; i < r.inertia_trace.size(); ++i) CHECK(r.inertia_trace[i] <= r.inertia_trace[i - 1] + 1e-9);
}

TEST_CASE("k-means with k = 1 and argument errors") {
  const EmbeddingMatrix m(3, 1, {1, 2, 9});
  KMeansConfig one;
  one.k = 1;
  const auto r = kmeans(m, one);
  CHECK(r.partition == Partition::whole(3));
  CHECK(r.centroids[0][0] == doctest::Approx(4.0));
  KMeansConfig big;
  big.k = 4;
  CHECK_THROWS_AS(kmeans(m, big), ValidationError);
  KMeansConfig zero;
  zero.k = 0;
  CHECK_THROWS_AS(kmeans(m, zero), ValidationError);
}

TEST_CASE("k-means final assignment is the nearest centroid, serial equals parallel") {
  std::mt19937_64 gen(8);
  const auto m = oracle::random_unit_rows(300, 5, gen);
  KMeansConfig cfg;
  cfg.k = 6;
  cfg.seed = 11;
  const auto r = kmeans(m, cfg);
  const auto s = kmeans_serial(m, cfg);
  CHECK(r.partition == s.partition);
  CHECK(r.inertia == s.inertia);
  double inertia = 0.0;
  for (std::size_t i = 0; i < m.n(); ++i) {
    double best = INFINITY;
    for (const auto& c : r.centroids) {
      double d2 = 0.0;
      for (std::size_t t = 0; t < m.d(); ++t) d2 += (m.row(i)[t] - c[t]) * (m.row(i)[t] - c[t]);
      best = std::min(best, d2);
    }
    double own = 0.0;
    for (std::size_t t = 0; t < m.d(); ++t) {
      const double diff = m.row(i)[t] - r.centroids[r.partition[i]][t];
      own += diff * diff;
    }
    CHECK(own <= best + 1e-12);
    inertia += own;
  }
  CHECK(inertia == doctest::Approx(r.inertia).epsilon(1e-9));
}

TEST_CASE("k-means with repeated points re-seeds empty clusters") {
  // Four copies of two points; k = 3 forces at least one duplicate seed.
  const EmbeddingMatrix m(8, 1, {0, 0, 0, 0, 1, 1, 1, 1});
  KMeansConfig cfg;
  cfg.k = 3;
  cfg.seed = 1;
  const auto r = kmeans(m, cfg);
  CHECK(r.partition.n() == 8);
  CHECK(r.inertia == doctest::Approx(0.0));
}

TEST_CASE("partition CSV round trip") {
  oracle::TempDir dir("community_csv");
  const CorpusGraph g({"a,1", "b\"q", "c"}, {});
  const Partition p({1, 0, 1});
  write_partition_csv(dir / "p.csv", p, g);
  CHECK(read_partition_csv(dir / "p.csv", g) == p);
  oracle::write_text(dir / "bad.csv", "pub_id,cluster\nzz,0\n");
  CHECK_THROWS_AS(read_partition_csv(dir / "bad.csv", g), ValidationError);
}
