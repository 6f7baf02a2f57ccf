// Independent reference computations used by the test suites.
#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "citeweave/community.hpp"
#include "citeweave/embedding.hpp"
#include "citeweave/knn.hpp"
#include "citeweave/rng.hpp"

namespace oracle {

using citeweave::NodeId;
using citeweave::WeightedPair;

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("citeweave_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Adjusted Rand index from the contingency table.
inline double ari(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, double> nij;
  std::map<std::uint32_t, double> ai, bj;
  for (std::size_t i = 0; i < a.size(); ++i) {
    nij[{a[i], b[i]}] += 1;
    ai[a[i]] += 1;
    bj[b[i]] += 1;
  }
  auto c2 = [](double x) { return x * (x - 1) / 2; };
  double sum_ij = 0, sum_a = 0, sum_b = 0;
  for (auto& [_, v] : nij) sum_ij += c2(v);
  for (auto& [_, v] : ai) sum_a += c2(v);
  for (auto& [_, v] : bj) sum_b += c2(v);
  const double expected = sum_a * sum_b / c2(static_cast<double>(a.size()));
  const double max_index = (sum_a + sum_b) / 2;
  if (max_index == expected) return 1.0;
  return (sum_ij - expected) / (max_index - expected);
}

/// Linear scan: score every candidate, sort, take k.
inline std::vector<citeweave::NeighborList> knn(std::vector<NodeId> queries, std::vector<NodeId> candidates,
                                                const citeweave::EmbeddingMatrix& m, std::size_t k) {
  std::sort(queries.begin(), queries.end());
  queries.erase(std::unique(queries.begin(), queries.end()), queries.end());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  std::vector<citeweave::NeighborList> out;
  for (const auto q : queries) {
    std::vector<citeweave::Neighbor> all;
    for (const auto c : candidates) {
      if (c == q) continue;
      double s = 0.0;
      for (std::size_t t = 0; t < m.d(); ++t)
        s += static_cast<double>(m.row(q)[t]) * static_cast<double>(m.row(c)[t]);
      s = std::clamp(s, -1.0, 1.0);
      all.push_back({c, s});
    }
    std::sort(all.begin(), all.end(), [](const auto& x, const auto& y) {
      return x.score != y.score ? x.score > y.score : x.node < y.node;
    });
    if (all.size() > k) all.resize(k);
    out.push_back({q, all});
  }
  return out;
}

/// RB modularity or CPM straight from the dense adjacency matrix.
inline double quality(const std::vector<WeightedPair>& edges, std::size_t n,
                      const std::vector<std::uint32_t>& label, const citeweave::QualityConfig& cfg) {
  std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
  for (const auto& e : edges) {
    const double w = cfg.use_weights ? e.w : 1.0;
    a[e.u][e.v] += w;
    a[e.v][e.u] += w;
  }
  if (cfg.function == citeweave::QualityFunction::Cpm) {
    double q = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (label[i] == label[j]) q += a[i][j] - cfg.resolution;
    return q;
  }
  std::vector<double> k(n, 0.0);
  double two_m = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      k[i] += a[i][j];
      two_m += a[i][j];
    }
  if (two_m == 0.0) return 0.0;
  double q = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (label[i] == label[j]) q += a[i][j] - cfg.resolution * k[i] * k[j] / two_m;
  return q / two_m;
}

/// Best quality over all set partitions of n nodes.
inline double best_quality(const std::vector<WeightedPair>& edges, std::size_t n,
                           const citeweave::QualityConfig& cfg) {
  std::vector<std::uint32_t> label(n, 0);
  double best = -INFINITY;
  // Restricted growth strings: label[i] <= 1 + max(label[0..i-1]).
  std::function<void(std::size_t, std::uint32_t)> rec = [&](std::size_t i, std::uint32_t used) {
    if (i == n) {
      best = std::max(best, quality(edges, n, label, cfg));
      return;
    }
    for (std::uint32_t c = 0; c <= used && c < n; ++c) {
      label[i] = c;
      rec(i + 1, std::max(used, c + 1));
    }
  };
  if (n == 0) return 0.0;
  rec(0, 0);
  return best;
}

/// True when `members` induce a connected subgraph.
inline bool connected(const std::vector<WeightedPair>& edges, const std::vector<NodeId>& members) {
  if (members.size() <= 1) return true;
  const std::set<NodeId> in(members.begin(), members.end());
  std::set<NodeId> seen{members[0]};
  std::vector<NodeId> stack{members[0]};
  while (!stack.empty()) {
    const auto v = stack.back();
    stack.pop_back();
    for (const auto& e : edges) {
      NodeId other;
      if (e.u == v) other = e.v;
      else if (e.v == v) other = e.u;
      else continue;
      if (in.count(other) && seen.insert(other).second) stack.push_back(other);
    }
  }
  return seen.size() == members.size();
}

/// Erdos-Renyi graph with unit weights.
inline std::vector<WeightedPair> random_graph(std::size_t n, double p, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<WeightedPair> edges;
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = i + 1; j < n; ++j)
      if (u(gen) < p) edges.push_back({i, j, 1.0});
  return edges;
}

/// n random unit rows of dimension d, optionally snapped to a coarse grid so
/// that equal scores occur.
inline citeweave::EmbeddingMatrix random_unit_rows(std::size_t n, std::size_t d, std::mt19937_64& gen,
                                                   bool coarse = false) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> small(-2, 2);
  std::vector<float> data(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    bool all_zero = true;
    for (std::size_t t = 0; t < d; ++t) {
      data[i * d + t] = coarse ? static_cast<float>(small(gen)) : static_cast<float>(g(gen));
      all_zero = all_zero && data[i * d + t] == 0.0f;
    }
    if (all_zero) data[i * d] = 1.0f;
  }
  return citeweave::normalize_rows(citeweave::EmbeddingMatrix(n, d, std::move(data)));
}

}  // namespace oracle
