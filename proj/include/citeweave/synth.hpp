#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "citeweave/corpus.hpp"
#include "citeweave/embedding.hpp"
#include "citeweave/metrics.hpp"

namespace citeweave {

struct PlantedSpec {
  std::vector<std::size_t> community_sizes{50, 50};
  /// Label per community; defaults to "C0", "C1", ... when empty.
  std::vector<std::string> community_labels;
  double p_intra = 0.2;
  double p_inter = 0.005;
  std::size_t embed_dim = 16;
  /// Cosine between any two community centers (must be in [0, 1)).
  double center_cosine = 0.3;
  /// Per-coordinate Gaussian noise added to the unit center before
  /// normalization.
  double noise_sigma = 0.1;
  /// Share of records that also carry the next community's label.
  double dual_label_fraction = 0.0;
  /// References to publications outside the corpus, per record.
  std::size_t external_refs = 0;
  std::uint64_t seed = 1;
};

struct FragmentSpec {
  std::size_t fragment_count = 0;
  std::size_t min_size = 8;
  std::size_t max_size = 20;
  std::uint32_t source_community = 0;
  std::uint64_t seed = 1;
};

struct SynthCorpus {
  std::vector<PublicationRecord> records;  ///< node-index order
  CorpusGraph graph;
  EmbeddingMatrix embeddings;              ///< normalized, node-index order
  std::vector<std::uint32_t> community;    ///< planted community per node
  std::vector<std::vector<NodeId>> fragments;
  CoverageIndex coverage;
  std::vector<std::pair<std::string, int>> coverage_entries;  ///< for writing
  /// Extra pipeline settings written into pipeline.conf (key = value).
  std::map<std::string, std::string> suggested_config;
};

/// Stochastic block model over the given communities with community-centered
/// embeddings. Bit-reproducible for a fixed seed.
SynthCorpus planted_graph(const PlantedSpec& spec);

/// Cuts `fragment_count` disjoint node groups out of the source community:
/// every edge between a group and the rest of the graph is removed, internal
/// edges stay, and a random spanning tree keeps each group connected. Nodes
/// already in `corpus.fragments` are not reused. Appends the new groups and
/// updates records' refs for the spanning-tree citations.
void fragment(SynthCorpus& corpus, const FragmentSpec& spec);

/// Named presets. "paper-mini": communities 2000 + 1000, p_intra 0.01,
/// p_inter 0.0005, d = 64, and 30 fragments of 8-20 nodes (20 + 10).
SynthCorpus synth_preset(const std::string& name, std::uint64_t seed);

/// Writes metadata.jsonl, edges.tsv, vectors.emb, ids.txt, coverage.tsv,
/// planted.csv and a starter pipeline.conf into `dir`.
void write_synth_corpus(const std::filesystem::path& dir, const SynthCorpus& corpus);

}  // namespace citeweave
