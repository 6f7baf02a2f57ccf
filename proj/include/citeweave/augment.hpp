#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "citeweave/community.hpp"
#include "citeweave/corpus.hpp"
#include "citeweave/embedding.hpp"
#include "citeweave/knn.hpp"

namespace citeweave {

/// Citation edge, optionally weighted by the clamped cosine of its endpoints.
struct CitingEdge {
  NodeId u;
  NodeId v;
  std::optional<double> w_textual;  ///< max(0, cosine); absent when unweighted
};

/// One edge of the augmented graph, u < v.
struct AugmentedEdge {
  NodeId u;
  NodeId v;
  std::optional<double> w_textual;  ///< absent when no cosine is known for the pair
  double w_citing;                  ///< 1 if a citation exists either way, else 0
  double w_blend;
  bool from_knn = false;            ///< pair was produced by the kNN repair step
};

struct Bookkeeping {
  std::size_t e_citing = 0;
  std::size_t e_textual = 0;
  std::size_t e_overlap = 0;
  std::size_t e_total = 0;

  /// e_total == e_citing + e_textual - e_overlap.
  bool consistent() const { return e_total + e_overlap == e_citing + e_textual; }
};

struct AugmentedGraph {
  std::size_t n = 0;
  double alpha = 0.5;
  std::vector<AugmentedEdge> edges;  ///< sorted by (u, v)
  Bookkeeping bookkeeping;
};

/// Members of every cluster with at most `size_threshold` nodes. Throws when
/// the threshold would select the largest cluster too.
std::vector<NodeId> select_small_cluster_nodes(const Partition& p,
                                               std::size_t size_threshold = 1000);

/// Weights every undirected citation edge with max(0, cosine). OpenMP over
/// edges; output order matches the graph's undirected edge order.
std::vector<CitingEdge> weight_citation_edges(const CorpusGraph& graph, const EmbeddingMatrix& m,
                                              int workers = 0);

/// Single-threaded reference for weight_citation_edges.
std::vector<CitingEdge> weight_citation_edges_serial(const CorpusGraph& graph,
                                                     const EmbeddingMatrix& m);

/// Union of textual and citing edges keyed by unordered pair, with
/// w_blend = alpha * w_textual + (1 - alpha) * w_citing. Textual cosines are
/// clamped at zero before use.
AugmentedGraph blend(std::size_t n, const std::vector<TextualEdge>& textual,
                     const std::vector<CitingEdge>& citing, double alpha = 0.5);

/// Clustering input using w_blend. Zero-weight pairs are dropped since they
/// carry no signal and the quality functions require positive weights.
std::vector<WeightedPair> weighted_view(const AugmentedGraph& g);

/// Every pair once with weight 1. With `count_overlap_twice`, pairs present
/// in both origins get weight 2 instead.
std::vector<WeightedPair> unweighted_view(const AugmentedGraph& g, bool count_overlap_twice = false);

/// TSV: u_id, v_id, w_textual (or "-"), w_citing, w_blend.
void write_augmented_tsv(const std::filesystem::path& path, const AugmentedGraph& g,
                         const CorpusGraph& graph);
/// Pairs from an augmented TSV, weighted by w_blend or set to 1.
std::vector<WeightedPair> read_augmented_pairs(const std::filesystem::path& path,
                                               const CorpusGraph& graph, bool use_blend);

/// Citation pairs of `graph` without semantic weights.
std::vector<CitingEdge> unweighted_citing(const CorpusGraph& graph);

std::string bookkeeping_json(const AugmentedGraph& g);

}  // namespace citeweave
