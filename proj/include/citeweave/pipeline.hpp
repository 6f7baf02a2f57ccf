#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "citeweave/community.hpp"
#include "citeweave/corpus.hpp"

namespace citeweave {

inline constexpr const char* kToolVersion = "0.3.0";

struct PipelineConfig {
  std::filesystem::path metadata;
  std::filesystem::path edges;
  std::filesystem::path vectors;
  std::filesystem::path ids;
  std::filesystem::path coverage;  ///< optional
  std::filesystem::path out_dir = "out";
  std::size_t k = 10;
  double alpha = 0.5;
  double resolution = 0.05;
  QualityFunction quality_function = QualityFunction::RbModularity;
  bool use_weights = true;  ///< also cluster the blended weights
  std::size_t size_threshold = 1000;
  std::uint64_t seed = 42;
  YearWindow year_window;
  std::size_t min_abstract_chars = 100;
  bool lcc = true;
  bool prune = true;
  bool prune_fixpoint = false;
  bool knn_global_candidates = true;  ///< false restricts candidates to the query set
  bool overlap_twice = false;
  int max_passes = 10;
  int restarts = 1;
  std::size_t kmeans_k = 0;  ///< 0 skips the k-means comparison
  std::string label_pair;    ///< "A,B"; empty picks the two most frequent labels
  int workers = 0;

  /// Applies one key = value setting. Throws ValidationError on unknown keys
  /// or unparsable values.
  void set(const std::string& key, const std::string& value);
  /// Key/value snapshot in the same vocabulary `set` accepts.
  std::map<std::string, std::string> to_map() const;
  /// Checks value ranges and that input files exist.
  void validate() const;
};

/// Flat "key = value" file; '#' starts a comment.
PipelineConfig read_config(const std::filesystem::path& path);
void apply_config_file(PipelineConfig& cfg, const std::filesystem::path& path);
/// Restores the configuration recorded in a run manifest.
PipelineConfig config_from_manifest(const std::filesystem::path& manifest_path);

/// Records in node-index order plus the preprocessed graph.
struct PreparedCorpus {
  std::vector<PublicationRecord> all_records;  ///< before filtering, for year lookups
  std::vector<PublicationRecord> records;      ///< aligned to graph
  CorpusGraph graph;
  FilterReport report;
};

/// Load, filter (abstract/year/metadata), build the graph, then optionally
/// keep the largest component and drop degree-one nodes.
PreparedCorpus prepare_corpus(const PipelineConfig& cfg);

/// Runs every stage and writes all reports plus manifest.json under out_dir.
/// On failure a FAILED marker naming the stage is left next to the partial
/// outputs and the error is rethrown.
void run_pipeline(const PipelineConfig& cfg);

}  // namespace citeweave
