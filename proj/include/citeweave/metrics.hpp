#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "citeweave/community.hpp"
#include "citeweave/corpus.hpp"

namespace citeweave {

struct ClusterHomogeneity {
  ClusterId cluster = 0;
  std::size_t size = 0;
  std::size_t labeled = 0;
  std::string dominant_label;  ///< empty when the cluster has no labeled member
  std::size_t dominant_count = 0;
  /// dominant_count / labeled; absent when labeled == 0.
  std::optional<double> homogeneity;
};

struct HomogeneityReport {
  std::vector<ClusterHomogeneity> clusters;  ///< by cluster id
  std::size_t unlabeled_records = 0;
};

/// A record carrying several labels counts toward each of them, so the
/// dominant label is the one carried by the most members. Ties go to the
/// lexicographically smallest label. `records` are in node-index order.
HomogeneityReport homogeneity(const Partition& p, const std::vector<PublicationRecord>& records);

/// Cluster sizes, largest first.
std::vector<std::size_t> cluster_size_distribution(const Partition& p);

/// Symmetric C x C edge counts; the diagonal holds intra-cluster edges.
class LinkMatrix {
 public:
  explicit LinkMatrix(std::size_t clusters = 0) : c_(clusters), counts_(clusters * clusters, 0) {}

  std::size_t size() const { return c_; }
  std::size_t at(std::size_t a, std::size_t b) const { return counts_[a * c_ + b]; }
  void add(std::size_t a, std::size_t b);
  /// Sum over a <= b, which equals the number of edges counted.
  std::size_t total() const;

 private:
  std::size_t c_;
  std::vector<std::size_t> counts_;
};

LinkMatrix link_distribution(const Partition& p, const std::vector<Edge>& edges);
LinkMatrix link_distribution(const Partition& p, const std::vector<WeightedPair>& edges);

struct ConfusionRow {
  std::size_t first_only = 0;
  std::size_t second_only = 0;
  std::size_t both = 0;
  std::size_t other = 0;      ///< labeled records carrying neither label
  std::size_t unlabeled = 0;  ///< outside the labeled total
  std::size_t labeled() const { return first_only + second_only + both + other; }
};

struct ConfusionTable {
  std::string first_label;
  std::string second_label;
  std::vector<ConfusionRow> rows;  ///< by cluster id
};

ConfusionTable confusion(const Partition& p, const std::vector<PublicationRecord>& records,
                         const std::string& first_label, const std::string& second_label);

/// Set of publications the bibliographic database covers, with their years
/// when known. Read from a text file: one pub_id per line, optionally
/// followed by a tab and the publication year.
class CoverageIndex {
 public:
  CoverageIndex() = default;
  static CoverageIndex read(const std::filesystem::path& path);

  void add(const std::string& id, std::optional<int> year = std::nullopt);
  bool covers(const std::string& id) const { return years_.contains(id); }
  std::optional<int> year_of(const std::string& id) const;

 private:
  std::unordered_map<std::string, std::optional<int>> years_;
};

struct RetentionFunnel {
  std::size_t total_refs = 0;
  std::size_t in_coverage = 0;
  std::size_t in_window = 0;
  std::size_t in_graph = 0;
  /// False when there were no references and all ratios are reported as 0.
  bool defined = false;

  double coverage_pct() const;
  double window_pct() const;
  double graph_pct() const;
};

/// Stage 1 counts every reference of `records`; stage 2 those in coverage;
/// stage 3 those whose cited publication year lies in `window` (year from the
/// coverage index, else from `year_source`); stage 4 those present as a
/// directed edge record -> ref in `graph`.
RetentionFunnel retention_funnel(const std::vector<PublicationRecord>& records,
                                 const CoverageIndex& coverage, const YearWindow& window,
                                 const CorpusGraph& graph,
                                 const std::vector<PublicationRecord>& year_source = {});

/// Half-up rounding to `decimals` places, applied to a percentage.
double round_half_up(double value, int decimals);

struct Histogram {
  double bin_width = 0.05;
  std::vector<std::size_t> counts;
  double low(std::size_t i) const { return static_cast<double>(i) * bin_width; }
  double high(std::size_t i) const { return static_cast<double>(i + 1) * bin_width; }
};

/// Fixed bins [0, w), [w, 2w), ..., with the last bin closed at 1.
Histogram weight_histogram(const std::vector<double>& weights, double bin_width = 0.05);

// Serialization helpers for reports.
std::string homogeneity_json(const HomogeneityReport& r);
void write_link_matrix_csv(const std::filesystem::path& path, const LinkMatrix& m);
void write_histogram_csv(const std::filesystem::path& path, const Histogram& h);
std::string confusion_json(const ConfusionTable& t);
std::string funnel_json(const RetentionFunnel& f);

}  // namespace citeweave
