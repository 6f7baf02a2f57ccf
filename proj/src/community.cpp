#include "citeweave/community.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "citeweave/error.hpp"
#include "citeweave/rng.hpp"

namespace citeweave {

// ---------------------------------------------------------------------------
// Partition

Partition::Partition(const std::vector<std::uint32_t>& labels) {
  const std::size_t n = labels.size();
  // Group by raw label, remembering each group's smallest member.
  std::vector<std::uint32_t> dense(n);
  std::vector<std::size_t> size;
  std::vector<NodeId> first;
  {
    std::vector<std::uint32_t> sorted(labels);
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    size.assign(sorted.size(), 0);
    first.assign(sorted.size(), std::numeric_limits<NodeId>::max());
    for (NodeId i = 0; i < n; ++i) {
      const auto g = static_cast<std::uint32_t>(
          std::lower_bound(sorted.begin(), sorted.end(), labels[i]) - sorted.begin());
      dense[i] = g;
      ++size[g];
      first[g] = std::min(first[g], i);
    }
  }
  std::vector<std::uint32_t> order(size.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return size[a] > size[b] || (size[a] == size[b] && first[a] < first[b]);
  });
  std::vector<ClusterId> rank(order.size());
  for (ClusterId r = 0; r < order.size(); ++r) rank[order[r]] = r;

  assignment_.resize(n);
  for (NodeId i = 0; i < n; ++i) assignment_[i] = rank[dense[i]];
  sizes_.resize(order.size());
  for (ClusterId r = 0; r < order.size(); ++r) sizes_[r] = size[order[r]];
}

Partition Partition::singletons(std::size_t n) {
  std::vector<std::uint32_t> labels(n);
  std::iota(labels.begin(), labels.end(), 0u);
  return Partition(labels);
}

Partition Partition::whole(std::size_t n) { return Partition(std::vector<std::uint32_t>(n, 0)); }

std::vector<std::vector<NodeId>> Partition::members() const {
  std::vector<std::vector<NodeId>> out(cluster_count());
  for (std::size_t c = 0; c < out.size(); ++c) out[c].reserve(sizes_[c]);
  for (NodeId i = 0; i < n(); ++i) out[assignment_[i]].push_back(i);
  return out;
}

std::string to_string(QualityFunction f) {
  return f == QualityFunction::Cpm ? "cpm" : "rb";
}

QualityFunction parse_quality_function(const std::string& s) {
  if (s == "rb" || s == "rb_modularity" || s == "RB_MODULARITY") return QualityFunction::RbModularity;
  if (s == "cpm" || s == "CPM") return QualityFunction::Cpm;
  throw ValidationError("unknown quality function: " + s);
}

// ---------------------------------------------------------------------------
// Quality

double quality(const std::vector<WeightedPair>& edges, std::size_t n, const Partition& p,
               const QualityConfig& cfg) {
  if (p.n() != n) throw ValidationError("quality: partition size does not match graph");
  const std::size_t c = p.cluster_count();
  std::vector<double> internal(c, 0.0);
  double total = 0.0;
  std::vector<double> volume(c, 0.0);
  for (const auto& e : edges) {
    const double w = cfg.use_weights ? e.w : 1.0;
    total += w;
    const auto cu = p[e.u];
    const auto cv = p[e.v];
    if (cu == cv) internal[cu] += w;
    volume[cu] += w;
    volume[cv] += w;
  }
  const double g = cfg.resolution;
  double q = 0.0;
  if (cfg.function == QualityFunction::Cpm) {
    for (std::size_t k = 0; k < c; ++k) {
      const auto nc = static_cast<double>(p.sizes()[k]);
      q += internal[k] - g * nc * (nc - 1.0) / 2.0;
    }
    return q;
  }
  if (total == 0.0) return 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    const double share = volume[k] / (2.0 * total);
    q += internal[k] / total - g * share * share;
  }
  return q;
}

// ---------------------------------------------------------------------------
// Leiden

namespace {

/// One level of the Leiden hierarchy in CSR form. Aggregated nodes carry
/// their summed node weight and the edge weight collapsed inside them.
struct LevelGraph {
  std::size_t n = 0;
  std::vector<std::size_t> offsets;
  std::vector<NodeId> targets;
  std::vector<double> weights;
  std::vector<double> node_weight;

  auto neighbors(NodeId v) const {
    return std::pair{offsets[v], offsets[v + 1]};
  }
};

struct Triple {
  NodeId a;
  NodeId b;
  double w;
};

LevelGraph build_csr(std::size_t n, std::vector<Triple> arcs, std::vector<double> node_weight) {
  std::sort(arcs.begin(), arcs.end(),
            [](const Triple& x, const Triple& y) { return x.a < y.a || (x.a == y.a && x.b < y.b); });
  LevelGraph g;
  g.n = n;
  g.offsets.assign(n + 1, 0);
  for (std::size_t i = 0; i < arcs.size();) {
    std::size_t j = i;
    double w = 0.0;
    for (; j < arcs.size() && arcs[j].a == arcs[i].a && arcs[j].b == arcs[i].b; ++j) w += arcs[j].w;
    g.targets.push_back(arcs[i].b);
    g.weights.push_back(w);
    ++g.offsets[arcs[i].a + 1];
    i = j;
  }
  std::partial_sum(g.offsets.begin(), g.offsets.end(), g.offsets.begin());
  g.node_weight = std::move(node_weight);
  return g;
}

class Leiden {
 public:
  Leiden(const std::vector<WeightedPair>& edges, std::size_t n, const QualityConfig& cfg)
      : cfg_(cfg), rng_(cfg.seed) {
    std::vector<Triple> arcs;
    arcs.reserve(edges.size() * 2);
    std::vector<double> strength(n, 0.0);
    double total = 0.0;
    for (const auto& e : edges) {
      const double w = cfg.use_weights ? e.w : 1.0;
      arcs.push_back({e.u, e.v, w});
      arcs.push_back({e.v, e.u, w});
      strength[e.u] += w;
      strength[e.v] += w;
      total += w;
    }
    std::vector<double> node_weight;
    if (cfg.function == QualityFunction::Cpm) {
      node_weight.assign(n, 1.0);
      scale_ = cfg.resolution;
    } else {
      node_weight = strength;
      scale_ = total > 0.0 ? cfg.resolution / (2.0 * total) : 0.0;
    }
    base_ = build_csr(n, std::move(arcs), std::move(node_weight));
  }

  /// One full Leiden iteration started from `membership` on the base graph.
  std::vector<std::uint32_t> iterate(std::vector<std::uint32_t> membership) {
    LevelGraph level = base_;
    std::vector<NodeId> node_map(base_.n);
    std::iota(node_map.begin(), node_map.end(), NodeId{0});
    std::vector<std::uint32_t> comm = relabel(membership);

    for (;;) {
      move_nodes_fast(level, comm);
      const std::size_t count = relabel_in_place(comm);
      if (count == level.n) break;
      const auto refined = refine(level, comm);
      std::vector<NodeId> agg_of;
      LevelGraph next = aggregate(level, refined, agg_of);
      if (next.n == level.n) break;
      std::vector<std::uint32_t> lifted(next.n);
      for (NodeId v = 0; v < level.n; ++v) lifted[agg_of[v]] = comm[v];
      for (auto& x : node_map) x = agg_of[x];
      comm = relabel(lifted);
      level = std::move(next);
    }
    for (NodeId i = 0; i < base_.n; ++i) membership[i] = comm[node_map[i]];
    return membership;
  }

  /// Splits every community into the connected components it induces.
  std::vector<std::uint32_t> split_disconnected(const std::vector<std::uint32_t>& membership) const {
    const std::size_t n = base_.n;
    std::vector<std::uint32_t> out(n, std::numeric_limits<std::uint32_t>::max());
    std::uint32_t next = 0;
    std::vector<NodeId> stack;
    for (NodeId s = 0; s < n; ++s) {
      if (out[s] != std::numeric_limits<std::uint32_t>::max()) continue;
      out[s] = next;
      stack.push_back(s);
      while (!stack.empty()) {
        const NodeId v = stack.back();
        stack.pop_back();
        const auto [lo, hi] = base_.neighbors(v);
        for (std::size_t e = lo; e < hi; ++e) {
          const NodeId u = base_.targets[e];
          if (membership[u] == membership[s] && out[u] == std::numeric_limits<std::uint32_t>::max()) {
            out[u] = next;
            stack.push_back(u);
          }
        }
      }
      ++next;
    }
    return out;
  }

 private:
  static std::vector<std::uint32_t> relabel(std::vector<std::uint32_t> labels) {
    relabel_in_place(labels);
    return labels;
  }

  /// Dense labels in order of first appearance; returns the label count.
  static std::size_t relabel_in_place(std::vector<std::uint32_t>& labels) {
    constexpr auto kUnset = std::numeric_limits<std::uint32_t>::max();
    std::uint32_t hi = 0;
    for (const auto x : labels) hi = std::max(hi, x);
    std::vector<std::uint32_t> map(labels.empty() ? 0 : std::size_t(hi) + 1, kUnset);
    std::uint32_t next = 0;
    for (auto& x : labels) {
      if (map[x] == kUnset) map[x] = next++;
      x = map[x];
    }
    return next;
  }

  std::vector<NodeId> random_order(std::size_t n) {
    std::vector<NodeId> order(n);
    std::iota(order.begin(), order.end(), NodeId{0});
    rng_.shuffle(std::span<NodeId>(order));
    return order;
  }

  /// Queue-based local moving: a node moves to the neighboring (or an empty)
  /// community with the strictly largest gain; neighbors outside the target
  /// community are requeued.
  void move_nodes_fast(const LevelGraph& g, std::vector<std::uint32_t>& comm) {
    const std::size_t n = g.n;
    std::vector<double> comm_weight(n, 0.0);
    std::vector<std::size_t> comm_count(n, 0);
    for (NodeId v = 0; v < n; ++v) {
      comm_weight[comm[v]] += g.node_weight[v];
      ++comm_count[comm[v]];
    }
    std::vector<std::uint32_t> empty;
    for (std::uint32_t c = n; c-- > 0;)
      if (comm_count[c] == 0) empty.push_back(c);

    std::deque<NodeId> queue;
    for (const NodeId v : random_order(n)) queue.push_back(v);
    std::vector<char> queued(n, 1);
    std::vector<double> link(n, 0.0);
    std::vector<std::uint32_t> touched;

    while (!queue.empty()) {
      const NodeId v = queue.front();
      queue.pop_front();
      queued[v] = 0;
      const std::uint32_t old = comm[v];
      const double a = g.node_weight[v];

      const auto [lo, hi] = g.neighbors(v);
      for (std::size_t e = lo; e < hi; ++e) {
        const std::uint32_t c = comm[g.targets[e]];
        if (link[c] == 0.0) touched.push_back(c);
        link[c] += g.weights[e];
      }

      comm_weight[old] -= a;
      --comm_count[old];

      // Staying wins ties; ties among other targets are broken uniformly.
      std::uint32_t best = old;
      double best_gain = link[old] - scale_ * a * comm_weight[old];
      std::size_t ties = 0;
      for (const auto c : touched) {
        if (c == old) continue;
        const double gain = link[c] - scale_ * a * comm_weight[c];
        if (gain > best_gain) {
          best_gain = gain;
          best = c;
          ties = 1;
        } else if (ties > 0 && gain == best_gain && rng_.uniform() * static_cast<double>(++ties) < 1.0) {
          best = c;
        }
      }
      if (comm_count[old] > 0 && best_gain < 0.0) {
        best = empty.back();
        empty.pop_back();
        best_gain = 0.0;
      }

      comm[v] = best;
      comm_weight[best] += a;
      ++comm_count[best];
      if (best != old) {
        if (comm_count[old] == 0) empty.push_back(old);
        for (std::size_t e = lo; e < hi; ++e) {
          const NodeId u = g.targets[e];
          if (!queued[u] && comm[u] != best) {
            queued[u] = 1;
            queue.push_back(u);
          }
        }
      }
      for (const auto c : touched) link[c] = 0.0;
      touched.clear();
    }
  }

  /// Refinement: inside each community, well-connected singletons merge into
  /// well-connected refined subcommunities, chosen at random with weight
  /// exp(gain / theta) among non-negative gains.
  std::vector<std::uint32_t> refine(const LevelGraph& g, const std::vector<std::uint32_t>& comm) {
    const std::size_t n = g.n;
    std::vector<std::uint32_t> refined(n);
    std::iota(refined.begin(), refined.end(), 0u);
    std::vector<double> ref_weight(g.node_weight);
    std::vector<std::size_t> ref_count(n, 1);
    std::vector<double> comm_weight(n, 0.0);
    for (NodeId v = 0; v < n; ++v) comm_weight[comm[v]] += g.node_weight[v];

    // ext[r]: weight from refined community r to the rest of its community.
    std::vector<double> ext(n, 0.0);
    for (NodeId v = 0; v < n; ++v) {
      const auto [lo, hi] = g.neighbors(v);
      for (std::size_t e = lo; e < hi; ++e) {
        const NodeId u = g.targets[e];
        if (u != v && comm[u] == comm[v]) ext[v] += g.weights[e];
      }
    }

    std::vector<double> link(n, 0.0);
    std::vector<std::uint32_t> touched;
    std::vector<std::uint32_t> options;
    std::vector<double> gains;

    for (const NodeId v : random_order(n)) {
      if (ref_count[refined[v]] != 1) continue;
      const double a = g.node_weight[v];
      const double total = comm_weight[comm[v]];
      if (ext[v] < scale_ * a * (total - a)) continue;  // v not well connected

      const auto [lo, hi] = g.neighbors(v);
      for (std::size_t e = lo; e < hi; ++e) {
        const NodeId u = g.targets[e];
        if (u == v || comm[u] != comm[v]) continue;
        const std::uint32_t r = refined[u];
        if (link[r] == 0.0) touched.push_back(r);
        link[r] += g.weights[e];
      }

      const std::uint32_t own = refined[v];
      options.assign(1, own);
      gains.assign(1, 0.0);
      double best = 0.0;
      for (const auto r : touched) {
        if (r == own) continue;
        if (ext[r] < scale_ * ref_weight[r] * (total - ref_weight[r])) continue;
        const double gain = link[r] - scale_ * a * ref_weight[r];
        if (gain < 0.0) continue;
        options.push_back(r);
        gains.push_back(gain);
        best = std::max(best, gain);
      }

      std::uint32_t chosen = own;
      if (options.size() > 1) {
        double sum = 0.0;
        for (auto& gn : gains) {
          gn = std::exp((gn - best) / cfg_.theta);
          sum += gn;
        }
        double pick = rng_.uniform() * sum;
        chosen = options.back();
        for (std::size_t i = 0; i < options.size(); ++i) {
          pick -= gains[i];
          if (pick < 0.0) {
            chosen = options[i];
            break;
          }
        }
      }
      if (chosen != own) {
        refined[v] = chosen;
        ref_weight[chosen] += a;
        ref_weight[own] = 0.0;
        ++ref_count[chosen];
        ref_count[own] = 0;
        ext[chosen] += ext[v] - 2.0 * link[chosen];
      }
      for (const auto r : touched) link[r] = 0.0;
      touched.clear();
    }
    return refined;
  }

  LevelGraph aggregate(const LevelGraph& g, const std::vector<std::uint32_t>& refined,
                       std::vector<NodeId>& agg_of) {
    agg_of = relabel(refined);
    const std::size_t count = *std::max_element(agg_of.begin(), agg_of.end()) + 1;
    std::vector<double> node_weight(count, 0.0);
    for (NodeId v = 0; v < g.n; ++v) node_weight[agg_of[v]] += g.node_weight[v];
    std::vector<Triple> arcs;
    arcs.reserve(g.targets.size());
    for (NodeId v = 0; v < g.n; ++v) {
      const auto [lo, hi] = g.neighbors(v);
      for (std::size_t e = lo; e < hi; ++e) {
        const NodeId a = agg_of[v];
        const NodeId b = agg_of[g.targets[e]];
        // Internal weight never affects a move gain, so it is dropped.
        if (a != b) arcs.push_back({a, b, g.weights[e]});
      }
    }
    return build_csr(count, std::move(arcs), std::move(node_weight));
  }

  QualityConfig cfg_;
  Rng rng_;
  LevelGraph base_;
  double scale_ = 0.0;
};

void validate_edges(const std::vector<WeightedPair>& edges, std::size_t n, bool use_weights) {
  std::vector<std::pair<NodeId, NodeId>> pairs;
  pairs.reserve(edges.size());
  for (const auto& e : edges) {
    if (e.u >= n || e.v >= n) throw ValidationError("edge endpoint out of range");
    if (e.u == e.v) throw ValidationError("self-loop in clustering input");
    if (use_weights && !(e.w > 0.0))
      throw ValidationError("non-positive edge weight " + std::to_string(e.w) +
                            " on {" + std::to_string(e.u) + "," + std::to_string(e.v) + "}");
    pairs.emplace_back(std::min(e.u, e.v), std::max(e.u, e.v));
  }
  std::sort(pairs.begin(), pairs.end());
  if (std::adjacent_find(pairs.begin(), pairs.end()) != pairs.end())
    throw ValidationError("duplicate edge in clustering input");
}

void validate_config(const QualityConfig& cfg) {
  if (!(cfg.resolution > 0.0)) throw ValidationError("resolution must be positive");
  if (cfg.max_passes < 1) throw ValidationError("max_passes must be at least 1");
  if (cfg.restarts < 1) throw ValidationError("restarts must be at least 1");
  if (!(cfg.theta > 0.0)) throw ValidationError("theta must be positive");
}

}  // namespace

namespace {

LeidenResult leiden_once(const std::vector<WeightedPair>& edges, std::size_t n, const QualityConfig& cfg) {
  LeidenResult result;
  result.partition = Partition::singletons(n);
  result.quality = quality(edges, n, result.partition, cfg);
  result.trace.push_back(result.quality);
  if (n == 0) return result;

  Leiden algo(edges, n, cfg);
  std::vector<std::uint32_t> membership(result.partition.assignment());
  for (int pass = 1; pass <= cfg.max_passes; ++pass) {
    result.passes = pass;
    Partition next(algo.split_disconnected(algo.iterate(membership)));
    if (next == result.partition) break;
    const double q = quality(edges, n, next, cfg);
    // Guards against a rounding-level regression; a pass never loses quality
    // in exact arithmetic.
    if (q < result.quality) break;
    result.partition = std::move(next);
    result.quality = q;
    result.trace.push_back(q);
    membership = result.partition.assignment();
  }
  return result;
}

}  // namespace

LeidenResult leiden(const std::vector<WeightedPair>& edges, std::size_t n,
                    const QualityConfig& cfg) {
  validate_config(cfg);
  validate_edges(edges, n, cfg.use_weights);
  LeidenResult best = leiden_once(edges, n, cfg);
  for (int r = 1; r < cfg.restarts; ++r) {
    QualityConfig c = cfg;
    c.seed = derive_seed(cfg.seed, "restart." + std::to_string(r));
    auto next = leiden_once(edges, n, c);
    if (next.quality > best.quality) best = std::move(next);
  }
  return best;
}

Partition brute_force_best_partition(const std::vector<WeightedPair>& edges, std::size_t n,
                                     const QualityConfig& cfg) {
  if (n > 10) throw ValidationError("brute force search supports n <= 10");
  validate_config(cfg);
  validate_edges(edges, n, cfg.use_weights);
  if (n == 0) return Partition{};

  // Restricted growth strings: rgs[0] = 0, rgs[i] <= 1 + max(rgs[0..i-1]).
  std::vector<std::uint32_t> rgs(n, 0), peak(n, 0);
  std::vector<std::uint32_t> best_rgs;
  double best_q = -std::numeric_limits<double>::infinity();
  std::size_t best_blocks = 0;
  for (;;) {
    const Partition p(rgs);
    const double q = quality(edges, n, p, cfg);
    const std::size_t blocks = p.cluster_count();
    // Enumeration is lexicographic, so the first string of a tie is kept.
    if (q > best_q + 1e-12 || (std::abs(q - best_q) <= 1e-12 && blocks > best_blocks)) {
      best_rgs = rgs;
      best_blocks = blocks;
      best_q = q;
    }
    // Next string in lexicographic order.
    std::size_t i = n;
    while (i-- > 1) {
      if (rgs[i] <= peak[i - 1]) break;
    }
    if (i == 0) break;
    ++rgs[i];
    peak[i] = std::max(peak[i - 1], rgs[i]);
    for (std::size_t j = i + 1; j < n; ++j) {
      rgs[j] = 0;
      peak[j] = peak[i];
    }
  }
  return Partition(best_rgs);
}

// ---------------------------------------------------------------------------
// K-means

namespace {

using Centroids = std::vector<std::vector<double>>;

double squared_distance(std::span<const float> x, const std::vector<double>& c) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double diff = static_cast<double>(x[i]) - c[i];
    acc += diff * diff;
  }
  return acc;
}

Centroids seed_plus_plus(const EmbeddingMatrix& m, std::size_t k, Rng& rng) {
  const std::size_t n = m.n();
  Centroids centroids;
  auto as_centroid = [&](std::size_t i) {
    const auto r = m.row(i);
    return std::vector<double>(r.begin(), r.end());
  };
  std::vector<char> chosen(n, 0);
  std::size_t first = rng.below(n);
  centroids.push_back(as_centroid(first));
  chosen[first] = 1;
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(m.row(i), centroids[0]);
  while (centroids.size() < k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = n;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        pick = i;
        r -= d2[i];
        if (r < 0.0) break;
      }
    } else {
      // Every point coincides with a centroid; take the first unused row.
      for (std::size_t i = 0; i < n && pick == n; ++i)
        if (!chosen[i]) pick = i;
    }
    chosen[pick] = 1;
    centroids.push_back(as_centroid(pick));
    for (std::size_t i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], squared_distance(m.row(i), centroids.back()));
  }
  return centroids;
}

/// Nearest-centroid assignment; ties go to the lower centroid index.
void assign(const EmbeddingMatrix& m, const Centroids& centroids, std::vector<std::uint32_t>& label,
            std::vector<double>& dist, bool parallel, int workers) {
  const auto n = static_cast<std::ptrdiff_t>(m.n());
#ifdef _OPENMP
  const int threads = !parallel ? 1 : (workers > 0 ? workers : omp_get_max_threads());
#pragma omp parallel for schedule(static) num_threads(threads)
#else
  (void)parallel;
  (void)workers;
#endif
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto row = m.row(static_cast<std::size_t>(i));
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t arg = 0;
    for (std::uint32_t c = 0; c < centroids.size(); ++c) {
      const double d = squared_distance(row, centroids[c]);
      if (d < best) {
        best = d;
        arg = c;
      }
    }
    label[i] = arg;
    dist[i] = best;
  }
}

/// Moves the farthest point of a multi-member cluster into each empty cluster.
void reseed_empty(const EmbeddingMatrix& m, Centroids& centroids, std::vector<std::uint32_t>& label,
                  std::vector<double>& dist) {
  std::vector<std::size_t> count(centroids.size(), 0);
  for (const auto l : label) ++count[l];
  for (std::uint32_t c = 0; c < centroids.size(); ++c) {
    if (count[c] != 0) continue;
    std::size_t far = m.n();
    for (std::size_t i = 0; i < m.n(); ++i) {
      if (count[label[i]] < 2) continue;
      if (far == m.n() || dist[i] > dist[far]) far = i;
    }
    if (far == m.n()) throw RuntimeFailure("kmeans: cannot re-seed an empty cluster");
    --count[label[far]];
    label[far] = c;
    count[c] = 1;
    dist[far] = 0.0;
    const auto r = m.row(far);
    centroids[c].assign(r.begin(), r.end());
  }
}

KMeansResult run_kmeans(const EmbeddingMatrix& m, const KMeansConfig& cfg, bool parallel) {
  if (cfg.k == 0) throw ValidationError("kmeans: k must be positive");
  if (cfg.k > m.n()) throw ValidationError("kmeans: k exceeds the number of points");
  if (!(cfg.tol >= 0.0)) throw ValidationError("kmeans: tol must be non-negative");
  if (cfg.max_iter < 1) throw ValidationError("kmeans: max_iter must be positive");

  const std::size_t n = m.n();
  const std::size_t d = m.d();
  Rng rng(cfg.seed);
  Centroids centroids = seed_plus_plus(m, cfg.k, rng);
  std::vector<std::uint32_t> label(n);
  std::vector<double> dist(n);
  KMeansResult result;

  auto assignment_step = [&] {
    assign(m, centroids, label, dist, parallel, cfg.workers);
    reseed_empty(m, centroids, label, dist);
    // Sequential sum keeps inertia independent of the thread count.
    result.inertia = std::accumulate(dist.begin(), dist.end(), 0.0);
    result.inertia_trace.push_back(result.inertia);
  };

  for (int it = 0; it < cfg.max_iter; ++it) {
    assignment_step();
    Centroids next(cfg.k, std::vector<double>(d, 0.0));
    std::vector<std::size_t> count(cfg.k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = m.row(i);
      auto& c = next[label[i]];
      for (std::size_t j = 0; j < d; ++j) c[j] += r[j];
      ++count[label[i]];
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < cfg.k; ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        next[c][j] /= static_cast<double>(count[c]);
        const double diff = next[c][j] - centroids[c][j];
        s += diff * diff;
      }
      shift = std::max(shift, std::sqrt(s));
    }
    centroids = std::move(next);
    result.iterations = it + 1;
    if (shift < cfg.tol || shift == 0.0) break;
  }
  // Final assignment against the returned centroids.
  assignment_step();

  result.partition = Partition(label);
  result.centroids.assign(cfg.k, {});
  for (std::size_t i = 0; i < n; ++i) {
    auto& slot = result.centroids[result.partition[i]];
    if (slot.empty()) slot = centroids[label[i]];
  }
  return result;
}

}  // namespace

KMeansResult kmeans(const EmbeddingMatrix& m, const KMeansConfig& cfg) {
  return run_kmeans(m, cfg, true);
}

KMeansResult kmeans_serial(const EmbeddingMatrix& m, const KMeansConfig& cfg) {
  return run_kmeans(m, cfg, false);
}

// ---------------------------------------------------------------------------
// I/O

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::pair<std::string, std::string> split_csv_pair(const std::string& line) {
  std::string first;
  std::size_t i = 0;
  if (!line.empty() && line[0] == '"') {
    for (i = 1; i < line.size(); ++i) {
      if (line[i] == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          first += '"';
          ++i;
        } else {
          ++i;
          break;
        }
      } else {
        first += line[i];
      }
    }
  } else {
    i = line.find(',');
    if (i == std::string::npos) throw ValidationError("partition CSV: expected two columns");
    first = line.substr(0, i);
  }
  if (i >= line.size() || line[i] != ',') throw ValidationError("partition CSV: expected two columns");
  return {first, line.substr(i + 1)};
}

}  // namespace

void write_partition_csv(const std::filesystem::path& path, const Partition& p,
                         const CorpusGraph& graph) {
  if (p.n() != graph.n()) throw ValidationError("partition does not match graph");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << "pub_id,cluster\n";
  for (NodeId i = 0; i < p.n(); ++i) out << csv_field(graph.id_of(i)) << ',' << p[i] << '\n';
}

Partition read_partition_csv(const std::filesystem::path& path, const CorpusGraph& graph) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("pub_id,cluster", 0) != 0)
    throw ValidationError(path.string() + ": missing header pub_id,cluster");
  constexpr auto kUnset = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> labels(graph.n(), kUnset);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto [id, cluster] = split_csv_pair(line);
    const auto idx = graph.index_of(id);
    if (!idx) throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": unknown id " + id);
    try {
      labels[*idx] = static_cast<std::uint32_t>(std::stoul(cluster));
    } catch (const std::exception&) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": bad cluster id");
    }
  }
  for (NodeId i = 0; i < graph.n(); ++i)
    if (labels[i] == kUnset) throw ValidationError(path.string() + ": no cluster for " + graph.id_of(i));
  return Partition(labels);
}

std::vector<WeightedPair> unit_pairs(const std::vector<Edge>& edges) {
  std::vector<WeightedPair> out;
  out.reserve(edges.size());
  for (const auto& e : edges) out.push_back({e.u, e.v, 1.0});
  return out;
}

}  // namespace citeweave
