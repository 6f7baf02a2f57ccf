#include "citeweave/knn.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "citeweave/error.hpp"

namespace citeweave {

namespace {

constexpr std::size_t kQueryTile = 8;

bool better(const Neighbor& a, const Neighbor& b) {
  return a.score > b.score || (a.score == b.score && a.node < b.node);
}

/// Bounded top-k keeper. The heap front is the worst retained neighbor.
class TopK {
 public:
  explicit TopK(std::size_t k) : k_(k) { heap_.reserve(k); }

  void offer(Neighbor cand) {
    if (heap_.size() < k_) {
      heap_.push_back(cand);
      std::push_heap(heap_.begin(), heap_.end(), better);
    } else if (better(cand, heap_.front())) {
      std::pop_heap(heap_.begin(), heap_.end(), better);
      heap_.back() = cand;
      std::push_heap(heap_.begin(), heap_.end(), better);
    }
  }

  std::vector<Neighbor> take() {
    std::sort_heap(heap_.begin(), heap_.end(), better);
    return std::move(heap_);
  }

 private:
  std::size_t k_;
  std::vector<Neighbor> heap_;
};

double score(std::span<const float> a, std::span<const float> b) {
  return std::clamp(dot(a, b), -1.0, 1.0);
}

std::vector<NodeId> sorted_unique(std::vector<NodeId> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

struct Prepared {
  std::vector<NodeId> queries;
  std::vector<NodeId> candidates;
};

Prepared prepare(const std::vector<NodeId>& queries, const std::vector<NodeId>& candidates,
                 const EmbeddingMatrix& m, std::size_t k) {
  if (k == 0) throw ValidationError("knn: k must be at least 1");
  if (!m.normalized()) throw ValidationError("knn: embedding matrix must be normalized");
  Prepared p{sorted_unique(queries), sorted_unique(candidates)};
  if (p.candidates.empty()) throw ValidationError("knn: empty candidate set");
  if ((!p.queries.empty() && p.queries.back() >= m.n()) || p.candidates.back() >= m.n())
    throw ValidationError("knn: node index out of range");
  return p;
}

std::size_t count_short(const std::vector<NeighborList>& lists, std::size_t k) {
  return static_cast<std::size_t>(std::count_if(
      lists.begin(), lists.end(), [k](const NeighborList& l) { return l.neighbors.size() < k; }));
}

}  // namespace

KnnResult knn_search(const std::vector<NodeId>& queries, const std::vector<NodeId>& candidates,
                     const EmbeddingMatrix& m, std::size_t k, int workers) {
  const Prepared p = prepare(queries, candidates, m, k);
  const std::size_t nq = p.queries.size();
  const std::size_t tiles = (nq + kQueryTile - 1) / kQueryTile;
  KnnResult result;
  result.lists.resize(nq);

#ifdef _OPENMP
  const int threads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
#else
  (void)workers;
#endif
  for (std::size_t t = 0; t < tiles; ++t) {
    const std::size_t lo = t * kQueryTile;
    const std::size_t width = std::min(kQueryTile, nq - lo);
    std::vector<TopK> keep(width, TopK(k));
    std::array<std::span<const float>, kQueryTile> qrow;
    for (std::size_t j = 0; j < width; ++j) qrow[j] = m.row(p.queries[lo + j]);

    // Each candidate row is streamed once per tile of queries.
    for (const NodeId c : p.candidates) {
      const auto crow = m.row(c);
      for (std::size_t j = 0; j < width; ++j) {
        if (c == p.queries[lo + j]) continue;
        keep[j].offer({c, score(qrow[j], crow)});
      }
    }
    for (std::size_t j = 0; j < width; ++j)
      result.lists[lo + j] = {p.queries[lo + j], keep[j].take()};
  }
  result.short_queries = count_short(result.lists, k);
  return result;
}

KnnResult knn_search_serial(const std::vector<NodeId>& queries,
                            const std::vector<NodeId>& candidates, const EmbeddingMatrix& m,
                            std::size_t k) {
  const Prepared p = prepare(queries, candidates, m, k);
  KnnResult result;
  result.lists.reserve(p.queries.size());
  for (const NodeId q : p.queries) {
    TopK keep(k);
    for (const NodeId c : p.candidates) {
      if (c != q) keep.offer({c, score(m.row(q), m.row(c))});
    }
    result.lists.push_back({q, keep.take()});
  }
  result.short_queries = count_short(result.lists, k);
  return result;
}

std::vector<TextualEdge> neighbor_lists_to_edges(const std::vector<NeighborList>& lists) {
  std::vector<TextualEdge> edges;
  for (const auto& list : lists) {
    for (const auto& nb : list.neighbors) {
      if (nb.node == list.query) continue;
      edges.push_back({std::min(list.query, nb.node), std::max(list.query, nb.node), nb.score});
    }
  }
  std::sort(edges.begin(), edges.end(), [](const TextualEdge& a, const TextualEdge& b) {
    return a.u < b.u || (a.u == b.u && a.v < b.v);
  });
  edges.erase(std::unique(edges.begin(), edges.end(),
                          [](const TextualEdge& a, const TextualEdge& b) {
                            return a.u == b.u && a.v == b.v;
                          }),
              edges.end());
  return edges;
}

void write_textual_edges(const std::filesystem::path& path, const std::vector<TextualEdge>& edges,
                         const CorpusGraph& graph) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  char buf[32];
  for (const auto& e : edges) {
    std::snprintf(buf, sizeof buf, "%.6f", e.weight);
    out << graph.id_of(e.u) << '\t' << graph.id_of(e.v) << '\t' << buf << '\n';
  }
}

}  // namespace citeweave
