#include "citeweave/augment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <json.hpp>

#include "citeweave/error.hpp"

namespace citeweave {

std::vector<NodeId> select_small_cluster_nodes(const Partition& p, std::size_t size_threshold) {
  if (p.cluster_count() == 0) return {};
  if (size_threshold >= p.sizes().front())
    throw ValidationError("threshold selects entire graph: threshold " +
                          std::to_string(size_threshold) + " >= largest cluster size " +
                          std::to_string(p.sizes().front()));
  std::vector<NodeId> out;
  for (NodeId i = 0; i < p.n(); ++i)
    if (p.sizes()[p[i]] <= size_threshold) out.push_back(i);
  return out;
}

namespace {

void check_bound(const CorpusGraph& graph, const EmbeddingMatrix& m) {
  if (m.n() != graph.n())
    throw ValidationError("embedding rows (" + std::to_string(m.n()) + ") do not match graph nodes (" +
                          std::to_string(graph.n()) + ")");
}

}  // namespace

std::vector<CitingEdge> weight_citation_edges(const CorpusGraph& graph, const EmbeddingMatrix& m,
                                              int workers) {
  check_bound(graph, m);
  const auto& edges = graph.undirected_edges();
  std::vector<CitingEdge> out(edges.size());
  const auto count = static_cast<std::ptrdiff_t>(edges.size());
#ifdef _OPENMP
  const int threads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel for schedule(static) num_threads(threads)
#else
  (void)workers;
#endif
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const auto& e = edges[i];
    out[i] = {e.u, e.v, std::max(0.0, cosine(e.u, e.v, m))};
  }
  return out;
}

std::vector<CitingEdge> weight_citation_edges_serial(const CorpusGraph& graph,
                                                     const EmbeddingMatrix& m) {
  check_bound(graph, m);
  std::vector<CitingEdge> out;
  out.reserve(graph.undirected_edges().size());
  for (const auto& e : graph.undirected_edges())
    out.push_back({e.u, e.v, std::max(0.0, cosine(e.u, e.v, m))});
  return out;
}

AugmentedGraph blend(std::size_t n, const std::vector<TextualEdge>& textual,
                     const std::vector<CitingEdge>& citing, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in [0, 1]");

  auto key_less = [](NodeId au, NodeId av, NodeId bu, NodeId bv) {
    return au < bu || (au == bu && av < bv);
  };
  auto sorted_textual = textual;
  auto sorted_citing = citing;
  for (auto& e : sorted_textual) {
    if (e.u > e.v) std::swap(e.u, e.v);
    if (e.u == e.v || e.v >= n) throw ValidationError("invalid textual edge");
  }
  for (auto& e : sorted_citing) {
    if (e.u > e.v) std::swap(e.u, e.v);
    if (e.u == e.v || e.v >= n) throw ValidationError("invalid citing edge");
  }
  std::sort(sorted_textual.begin(), sorted_textual.end(),
            [&](const auto& a, const auto& b) { return key_less(a.u, a.v, b.u, b.v); });
  std::sort(sorted_citing.begin(), sorted_citing.end(),
            [&](const auto& a, const auto& b) { return key_less(a.u, a.v, b.u, b.v); });
  auto same = [](const auto& a, const auto& b) { return a.u == b.u && a.v == b.v; };
  if (std::adjacent_find(sorted_textual.begin(), sorted_textual.end(), same) != sorted_textual.end())
    throw ValidationError("duplicate textual edge");
  if (std::adjacent_find(sorted_citing.begin(), sorted_citing.end(), same) != sorted_citing.end())
    throw ValidationError("duplicate citing edge");

  AugmentedGraph g;
  g.n = n;
  g.alpha = alpha;
  g.edges.reserve(sorted_textual.size() + sorted_citing.size());
  auto make = [alpha](NodeId u, NodeId v, std::optional<double> t, double c, bool knn) {
    return AugmentedEdge{u, v, t, c, alpha * t.value_or(0.0) + (1.0 - alpha) * c, knn};
  };

  std::size_t i = 0, j = 0;
  std::size_t overlap = 0;
  while (i < sorted_textual.size() || j < sorted_citing.size()) {
    const bool take_t = j == sorted_citing.size() ||
                        (i < sorted_textual.size() &&
                         !key_less(sorted_citing[j].u, sorted_citing[j].v, sorted_textual[i].u,
                                   sorted_textual[i].v));
    const bool take_c = i == sorted_textual.size() ||
                        (j < sorted_citing.size() &&
                         !key_less(sorted_textual[i].u, sorted_textual[i].v, sorted_citing[j].u,
                                   sorted_citing[j].v));
    if (take_t && take_c) {
      const auto& t = sorted_textual[i++];
      ++j;
      ++overlap;
      g.edges.push_back(make(t.u, t.v, std::max(0.0, t.weight), 1.0, true));
    } else if (take_t) {
      const auto& t = sorted_textual[i++];
      g.edges.push_back(make(t.u, t.v, std::max(0.0, t.weight), 0.0, true));
    } else {
      const auto& c = sorted_citing[j++];
      g.edges.push_back(make(c.u, c.v, c.w_textual, 1.0, false));
    }
  }
  // An overlap pair's kNN score and its citation weight are the same cosine.
  g.bookkeeping = {sorted_citing.size(), sorted_textual.size(), overlap, g.edges.size()};
  return g;
}

std::vector<WeightedPair> weighted_view(const AugmentedGraph& g) {
  std::vector<WeightedPair> out;
  out.reserve(g.edges.size());
  for (const auto& e : g.edges)
    if (e.w_blend > 0.0) out.push_back({e.u, e.v, e.w_blend});
  return out;
}

std::vector<WeightedPair> unweighted_view(const AugmentedGraph& g, bool count_overlap_twice) {
  std::vector<WeightedPair> out;
  out.reserve(g.edges.size());
  for (const auto& e : g.edges) {
    const bool both = count_overlap_twice && e.from_knn && e.w_citing > 0.0;
    out.push_back({e.u, e.v, both ? 2.0 : 1.0});
  }
  return out;
}

void write_augmented_tsv(const std::filesystem::path& path, const AugmentedGraph& g,
                         const CorpusGraph& graph) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  char buf[96];
  for (const auto& e : g.edges) {
    out << graph.id_of(e.u) << '\t' << graph.id_of(e.v) << '\t';
    if (e.w_textual) {
      std::snprintf(buf, sizeof buf, "%.6f", *e.w_textual);
      out << buf;
    } else {
      out << '-';
    }
    std::snprintf(buf, sizeof buf, "\t%.0f\t%.6f\n", e.w_citing, e.w_blend);
    out << buf;
  }
}

std::vector<WeightedPair> read_augmented_pairs(const std::filesystem::path& path,
                                               const CorpusGraph& graph, bool use_blend) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::vector<WeightedPair> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string col; std::getline(ss, col, '\t');) cols.push_back(col);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (cols.size() != 5) throw ValidationError(where + ": expected 5 columns");
    const auto u = graph.index_of(cols[0]);
    const auto v = graph.index_of(cols[1]);
    if (!u || !v) throw ValidationError(where + ": unknown pub_id");
    double w = 1.0;
    if (use_blend) {
      try {
        w = std::stod(cols[4]);
      } catch (const std::exception&) {
        throw ValidationError(where + ": bad w_blend");
      }
      if (w <= 0.0) continue;
    }
    out.push_back({std::min(*u, *v), std::max(*u, *v), w});
  }
  return out;
}

std::vector<CitingEdge> unweighted_citing(const CorpusGraph& graph) {
  std::vector<CitingEdge> out;
  out.reserve(graph.undirected_edges().size());
  for (const auto& e : graph.undirected_edges()) out.push_back({e.u, e.v, std::nullopt});
  return out;
}

std::string bookkeeping_json(const AugmentedGraph& g) {
  nlohmann::json j = {{"alpha", g.alpha},
                      {"e_citing", g.bookkeeping.e_citing},
                      {"e_textual", g.bookkeeping.e_textual},
                      {"e_overlap", g.bookkeeping.e_overlap},
                      {"e_total", g.bookkeeping.e_total},
                      {"identity_holds", g.bookkeeping.consistent()}};
  return j.dump(2);
}

}  // namespace citeweave
