#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "citeweave/corpus.hpp"
#include "citeweave/embedding.hpp"

namespace citeweave {

using ClusterId = std::uint32_t;

/// Undirected weighted edge, u < v.
struct WeightedPair {
  NodeId u;
  NodeId v;
  double w = 1.0;
};

/// Node-to-cluster assignment with canonical ids: clusters ordered by
/// descending size, ties by smallest member index.
class Partition {
 public:
  Partition() = default;
  /// Canonicalizes arbitrary labels.
  explicit Partition(const std::vector<std::uint32_t>& labels);

  static Partition singletons(std::size_t n);
  static Partition whole(std::size_t n);

  std::size_t n() const { return assignment_.size(); }
  std::size_t cluster_count() const { return sizes_.size(); }
  ClusterId operator[](NodeId i) const { return assignment_[i]; }
  const std::vector<ClusterId>& assignment() const { return assignment_; }
  const std::vector<std::size_t>& sizes() const { return sizes_; }
  std::vector<std::vector<NodeId>> members() const;

  friend bool operator==(const Partition&, const Partition&) = default;

 private:
  std::vector<ClusterId> assignment_;
  std::vector<std::size_t> sizes_;
};

enum class QualityFunction { RbModularity, Cpm };

std::string to_string(QualityFunction f);
QualityFunction parse_quality_function(const std::string& s);

struct QualityConfig {
  QualityFunction function = QualityFunction::RbModularity;
  double resolution = 0.05;
  bool use_weights = true;
  std::uint64_t seed = 0;
  int max_passes = 10;
  /// Independent runs from derived seeds; the best quality wins, earliest on ties.
  int restarts = 1;
  /// Randomness of the refinement merge choice.
  double theta = 0.01;
};

/// RB modularity  (1/2m) sum_ij [A_ij - g k_i k_j / 2m] d(c_i, c_j)
/// or CPM         sum_c [W_c - g n_c (n_c - 1) / 2].
/// Edges are read with their weights when cfg.use_weights, else as 1.
/// An edgeless graph has RB modularity 0.
double quality(const std::vector<WeightedPair>& edges, std::size_t n, const Partition& p,
               const QualityConfig& cfg);

struct LeidenResult {
  Partition partition;
  double quality = 0.0;
  /// Quality after each completed pass, starting with the singleton value.
  std::vector<double> trace;
  int passes = 0;
};

/// Leiden community detection: fast local moving, refinement of each
/// community into well-connected subcommunities, aggregation on the refined
/// partition. Passes repeat from the previous result until one changes
/// nothing or max_passes is reached. Every returned community is connected.
LeidenResult leiden(const std::vector<WeightedPair>& edges, std::size_t n,
                    const QualityConfig& cfg);

/// Exhaustive search over all set partitions (Bell number many), n <= 10.
/// Ties within 1e-12 prefer more clusters, then the lexicographically
/// smallest restricted-growth labeling.
Partition brute_force_best_partition(const std::vector<WeightedPair>& edges, std::size_t n,
                                     const QualityConfig& cfg);

struct KMeansConfig {
  std::size_t k = 2;
  std::uint64_t seed = 0;
  int max_iter = 300;
  double tol = 1e-6;
  int workers = 0;
};

struct KMeansResult {
  Partition partition;
  std::vector<std::vector<double>> centroids;  ///< indexed by canonical cluster id
  double inertia = 0.0;
  /// Inertia after every assignment step.
  std::vector<double> inertia_trace;
  int iterations = 0;
};

/// Lloyd iterations from k-means++ seeding. Stops when the largest centroid
/// shift drops below tol or after max_iter. An emptied cluster is re-seeded at
/// the point farthest from its centroid (lowest index on ties).
KMeansResult kmeans(const EmbeddingMatrix& m, const KMeansConfig& cfg);

/// Same algorithm with the assignment step run on one thread.
KMeansResult kmeans_serial(const EmbeddingMatrix& m, const KMeansConfig& cfg);

/// CSV with header "pub_id,cluster", one row per node.
void write_partition_csv(const std::filesystem::path& path, const Partition& p,
                         const CorpusGraph& graph);
Partition read_partition_csv(const std::filesystem::path& path, const CorpusGraph& graph);

/// Unit-weight pairs from the undirected projection.
std::vector<WeightedPair> unit_pairs(const std::vector<Edge>& edges);

}  // namespace citeweave
