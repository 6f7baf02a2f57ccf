#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "citeweave/corpus.hpp"
#include "citeweave/embedding.hpp"

namespace citeweave {

struct Neighbor {
  NodeId node;
  double score;
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Neighbors of one query, best first: score descending, then node ascending.
struct NeighborList {
  NodeId query;
  std::vector<Neighbor> neighbors;
  friend bool operator==(const NeighborList&, const NeighborList&) = default;
};

/// Undirected textual edge; weight is the endpoints' cosine.
struct TextualEdge {
  NodeId u;
  NodeId v;
  double weight;
  friend bool operator==(const TextualEdge&, const TextualEdge&) = default;
};

struct KnnResult {
  std::vector<NeighborList> lists;  ///< one per query, ascending query order
  /// Queries that got fewer than k neighbors because candidates ran out.
  std::size_t short_queries = 0;
};

/// Exact top-k cosine search. `queries` and `candidates` are node index sets
/// (any order, duplicates ignored); the query itself is never its own
/// neighbor. The matrix must be normalized. Parallel over query tiles with
/// OpenMP; `workers` == 0 keeps the OpenMP default thread count.
KnnResult knn_search(const std::vector<NodeId>& queries, const std::vector<NodeId>& candidates,
                     const EmbeddingMatrix& m, std::size_t k, int workers = 0);

/// Single-threaded reference for knn_search: one query at a time, no tiling.
KnnResult knn_search_serial(const std::vector<NodeId>& queries,
                            const std::vector<NodeId>& candidates, const EmbeddingMatrix& m,
                            std::size_t k);

/// Each (query, neighbor) pair becomes the undirected edge {query, neighbor};
/// reciprocal pairs collapse. Sorted by (u, v).
std::vector<TextualEdge> neighbor_lists_to_edges(const std::vector<NeighborList>& lists);

/// TSV: u_id <TAB> v_id <TAB> weight with six decimals.
void write_textual_edges(const std::filesystem::path& path, const std::vector<TextualEdge>& edges,
                         const CorpusGraph& graph);

}  // namespace citeweave
