#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace citeweave {

using NodeId = std::uint32_t;

struct PublicationRecord {
  std::string pub_id;
  std::string title;
  std::string abstract;
  /// Absent when the source line carried no usable year.
  std::optional<int> year;
  std::vector<std::string> labels;
  std::vector<std::string> refs;

  bool has_label(std::string_view label) const;
};

struct RawEdge {
  std::string citing;
  std::string cited;
};

/// Directed citation edge between dense node indices.
struct Arc {
  NodeId citing;
  NodeId cited;
  friend auto operator<=>(const Arc&, const Arc&) = default;
};

/// Undirected simple edge, u < v.
struct Edge {
  NodeId u;
  NodeId v;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Counts of what each preprocessing rule removed. Every stage satisfies
/// removed + survivors == input.
struct FilterReport {
  // load_corpus
  std::size_t edge_lines = 0;
  std::size_t duplicate_edges = 0;
  std::size_t unmatched_edges = 0;
  std::vector<RawEdge> unmatched;

  // apply_filters (records)
  std::size_t records_in = 0;
  std::size_t missing_metadata = 0;
  std::size_t abstract_too_short = 0;
  std::size_t outside_year_window = 0;
  std::size_t records_out = 0;
  std::size_t unlabeled = 0;  // kept, flagged

  // graph construction
  std::size_t edges_in = 0;
  std::size_t edges_endpoint_filtered = 0;
  std::size_t self_citations = 0;
  std::size_t edges_out = 0;

  // largest_component
  std::size_t lcc_nodes_in = 0;
  std::size_t outside_lcc = 0;
  std::size_t lcc_nodes_out = 0;

  // prune_degree_one
  std::size_t prune_nodes_in = 0;
  std::size_t degree_one = 0;
  std::size_t prune_nodes_out = 0;
};

/// Directed citation graph over dense indices 0..n-1 with its undirected
/// simple projection. Indices follow ascending pub_id order.
class CorpusGraph {
 public:
  CorpusGraph() = default;

  /// Builds from ids and index-space arcs. Arcs are deduplicated and sorted;
  /// self-citations are kept in the directed list but never projected.
  CorpusGraph(std::vector<std::string> ids, std::vector<Arc> arcs);

  std::size_t n() const { return id_of_.size(); }
  const std::vector<Arc>& directed_edges() const { return directed_; }
  const std::vector<Edge>& undirected_edges() const { return undirected_; }
  const std::string& id_of(NodeId i) const { return id_of_.at(i); }
  const std::vector<std::string>& ids() const { return id_of_; }
  std::optional<NodeId> index_of(const std::string& id) const;

  /// Undirected degree of each node in the projection.
  std::vector<std::size_t> degrees() const;

  /// Subgraph induced by `keep` (sorted ascending). Indices are re-densified
  /// preserving relative order.
  CorpusGraph induced(const std::vector<NodeId>& keep) const;

 private:
  std::vector<std::string> id_of_;
  std::unordered_map<std::string, NodeId> index_of_;
  std::vector<Arc> directed_;
  std::vector<Edge> undirected_;
};

struct LoadedCorpus {
  std::vector<PublicationRecord> records;
  /// Edges whose endpoints both resolve to a record, duplicates collapsed,
  /// in first-seen order.
  std::vector<RawEdge> edges;
  FilterReport report;
};

/// Reads the JSON Lines metadata file and the citing/cited TSV.
/// Throws ValidationError on malformed lines (with line number) and on
/// duplicate pub_ids.
LoadedCorpus load_corpus(const std::filesystem::path& metadata_path,
                         const std::filesystem::path& edges_path);

std::vector<PublicationRecord> read_metadata(const std::filesystem::path& path);
void write_metadata(const std::filesystem::path& path,
                    const std::vector<PublicationRecord>& records);
void write_edges(const std::filesystem::path& path, const std::vector<RawEdge>& edges);

struct YearWindow {
  int first = 2000;
  int last = 2024;
  bool contains(int year) const { return first <= year && year <= last; }
};

struct FilterOptions {
  std::size_t min_abstract_chars = 100;
  YearWindow year_window;
};

/// Unicode scalar count after collapsing whitespace runs to one space and
/// trimming both ends.
std::size_t normalized_length(std::string_view text);

/// Keeps records with id, title and year present, normalized abstract length
/// >= min_abstract_chars, and year inside the window. Fills the record
/// section of `report`.
std::vector<PublicationRecord> apply_filters(const std::vector<PublicationRecord>& records,
                                             const FilterOptions& options,
                                             FilterReport& report);

/// Graph over `records` using the edges whose endpoints both survived.
CorpusGraph build_graph(const std::vector<PublicationRecord>& records,
                        const std::vector<RawEdge>& edges, FilterReport& report);

/// Connected component labels of the undirected projection; returns the
/// component count. Labels are ordered by smallest member index.
std::size_t connected_components(std::size_t n, const std::vector<Edge>& edges,
                                 std::vector<NodeId>& label);

/// Induced subgraph on the largest undirected component. Ties go to the
/// component with the smallest minimum node index.
CorpusGraph largest_component(const CorpusGraph& graph, FilterReport* report = nullptr);

/// Removes every node whose undirected degree in the input is exactly one.
/// Single pass unless `to_fixpoint`.
CorpusGraph prune_degree_one(const CorpusGraph& graph, bool to_fixpoint = false,
                             FilterReport* report = nullptr);

/// Deduplicated undirected edges (u < v) with self-loops dropped.
std::vector<Edge> undirected_projection(const std::vector<Arc>& arcs);

/// Records reordered to node-index order of `graph` (records not in the graph
/// are dropped).
std::vector<PublicationRecord> align_records(const std::vector<PublicationRecord>& records,
                                             const CorpusGraph& graph);

std::string filter_report_json(const FilterReport& report);

}  // namespace citeweave
