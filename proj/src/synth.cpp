#include "citeweave/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "citeweave/error.hpp"
#include "citeweave/rng.hpp"

namespace citeweave {

namespace {

std::string make_id(char prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%07zu", prefix, i);
  return buf;
}

/// Geometric skip length for Bernoulli(p) trials.
std::uint64_t skip(Rng& rng, double log_q) {
  double u;
  do {
    u = rng.uniform();
  } while (u <= 0.0);
  return static_cast<std::uint64_t>(std::floor(std::log(u) / log_q));
}

/// Calls fn(k) for each index k < total that succeeds with probability p.
template <class Fn>
void sample_indices(std::uint64_t total, double p, Rng& rng, Fn fn) {
  if (p <= 0.0 || total == 0) return;
  if (p >= 1.0) {
    for (std::uint64_t k = 0; k < total; ++k) fn(k);
    return;
  }
  const double log_q = std::log1p(-p);
  for (std::uint64_t k = skip(rng, log_q); k < total; k += 1 + skip(rng, log_q)) fn(k);
}

/// Row and column of pair index k in the strict upper triangle, rows first.
std::pair<std::uint64_t, std::uint64_t> triangle_pair(std::uint64_t k, std::uint64_t s) {
  // Row r holds s - 1 - r pairs; find r by solving the prefix sum.
  const double n = static_cast<double>(s);
  auto r = static_cast<std::uint64_t>(
      std::floor(((2.0 * n - 1.0) - std::sqrt((2.0 * n - 1.0) * (2.0 * n - 1.0) - 8.0 * double(k))) / 2.0));
  auto before = [s](std::uint64_t row) { return row * (2 * s - row - 1) / 2; };
  while (r > 0 && before(r) > k) --r;
  while (before(r + 1) <= k) ++r;
  return {r, r + 1 + (k - before(r))};
}

std::string filler_text(const std::string& id, const std::string& label, Rng& rng) {
  static const char* const kWords[] = {"graph",     "operator",  "bound",    "model",   "network",
                                       "algorithm", "estimate",  "lattice",  "scheme",  "analysis",
                                       "convex",    "stochastic", "integral", "policy", "spectrum"};
  std::string text = "Synthetic abstract of " + id + " in " + label + ":";
  while (text.size() < 160) {
    text += ' ';
    text += kWords[rng.below(std::size(kWords))];
  }
  return text + ".";
}

}  // namespace

SynthCorpus planted_graph(const PlantedSpec& spec) {
  const std::size_t blocks = spec.community_sizes.size();
  if (blocks == 0) throw ValidationError("planted spec needs at least one community");
  for (const auto s : spec.community_sizes)
    if (s == 0) throw ValidationError("community sizes must be positive");
  auto prob_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob_ok(spec.p_intra) || !prob_ok(spec.p_inter))
    throw ValidationError("edge probabilities must lie in [0, 1]");
  if (blocks > 1 && !(spec.p_intra > spec.p_inter))
    throw ValidationError("p_intra must exceed p_inter");
  if (spec.embed_dim < blocks + 1) throw ValidationError("embed_dim must exceed the community count");
  if (!(spec.center_cosine >= 0.0 && spec.center_cosine < 1.0))
    throw ValidationError("center_cosine must lie in [0, 1)");
  if (spec.noise_sigma < 0.0) throw ValidationError("noise_sigma must be non-negative");
  if (!spec.community_labels.empty() && spec.community_labels.size() != blocks)
    throw ValidationError("one label per community required");

  Rng rng(spec.seed);
  SynthCorpus out;
  std::vector<std::string> labels = spec.community_labels;
  if (labels.empty())
    for (std::size_t b = 0; b < blocks; ++b) labels.push_back("C" + std::to_string(b));

  std::vector<std::size_t> start(blocks + 1, 0);
  for (std::size_t b = 0; b < blocks; ++b) start[b + 1] = start[b] + spec.community_sizes[b];
  const std::size_t n = start[blocks];
  for (std::size_t b = 0; b < blocks; ++b)
    for (std::size_t i = start[b]; i < start[b + 1]; ++i) out.community.push_back(static_cast<std::uint32_t>(b));

  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = make_id('P', i);

  // Edges, block pair by block pair. Direction is a fair coin.
  std::vector<Arc> arcs;
  auto add_pair = [&](std::uint64_t a, std::uint64_t b) {
    const auto x = static_cast<NodeId>(a);
    const auto y = static_cast<NodeId>(b);
    arcs.push_back(rng.below(2) ? Arc{x, y} : Arc{y, x});
  };
  for (std::size_t a = 0; a < blocks; ++a) {
    const std::uint64_t sa = spec.community_sizes[a];
    sample_indices(sa * (sa - 1) / 2, spec.p_intra, rng, [&](std::uint64_t k) {
      const auto [r, c] = triangle_pair(k, sa);
      add_pair(start[a] + r, start[a] + c);
    });
    for (std::size_t b = a + 1; b < blocks; ++b) {
      const std::uint64_t sb = spec.community_sizes[b];
      sample_indices(sa * sb, spec.p_inter, rng, [&](std::uint64_t k) {
        add_pair(start[a] + k / sb, start[b] + k % sb);
      });
    }
  }

  // Community centers: sqrt(rho) * e0 + sqrt(1 - rho) * e_{b+1}, so any two
  // centers have cosine rho.
  const std::size_t d = spec.embed_dim;
  const double shared = std::sqrt(spec.center_cosine);
  const double own = std::sqrt(1.0 - spec.center_cosine);
  std::vector<float> data(n * d);
  std::vector<double> v(d);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t b = out.community[i];
    double norm2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double center = (j == 0 ? shared : 0.0) + (j == b + 1 ? own : 0.0);
      v[j] = center + spec.noise_sigma * rng.normal();
      norm2 += v[j] * v[j];
    }
    const double norm = std::sqrt(norm2);
    for (std::size_t j = 0; j < d; ++j) data[i * d + j] = static_cast<float>(v[j] / norm);
  }
  out.embeddings = normalize_rows(EmbeddingMatrix(n, d, std::move(data)));

  // Records. refs mirror the citing side of every arc plus optional external refs.
  out.records.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = out.records[i];
    const std::size_t b = out.community[i];
    r.pub_id = ids[i];
    r.title = "Synthetic publication " + ids[i];
    r.abstract = filler_text(ids[i], labels[b], rng);
    r.year = 2000 + static_cast<int>(rng.below(25));
    r.labels = {labels[b]};
    if (blocks > 1 && rng.uniform() < spec.dual_label_fraction) r.labels.push_back(labels[(b + 1) % blocks]);
  }
  for (const auto& a : arcs) out.records[a.citing].refs.push_back(ids[a.cited]);
  std::size_t external = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t e = 0; e < spec.external_refs; ++e) {
      const std::string ext = make_id('X', external++);
      out.records[i].refs.push_back(ext);
      // Half of the outside references are covered, with years spread over
      // 1980-2024.
      if (rng.below(2) == 0) {
        const int year = 1980 + static_cast<int>(rng.below(45));
        out.coverage.add(ext, year);
        out.coverage_entries.emplace_back(ext, year);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    out.coverage.add(ids[i], *out.records[i].year);
    out.coverage_entries.emplace_back(ids[i], *out.records[i].year);
  }
  out.graph = CorpusGraph(std::move(ids), std::move(arcs));
  return out;
}

void fragment(SynthCorpus& corpus, const FragmentSpec& spec) {
  if (spec.fragment_count == 0) return;
  if (spec.min_size == 0 || spec.min_size > spec.max_size)
    throw ValidationError("fragment size range is invalid");
  const std::size_t n = corpus.graph.n();
  std::vector<char> taken(n, 0);
  for (const auto& f : corpus.fragments)
    for (const auto v : f) taken[v] = 1;
  std::vector<NodeId> pool;
  for (NodeId i = 0; i < n; ++i)
    if (corpus.community[i] == spec.source_community && !taken[i]) pool.push_back(i);

  Rng rng(spec.seed);
  std::vector<std::size_t> sizes(spec.fragment_count);
  std::size_t needed = 0;
  for (auto& s : sizes) {
    s = spec.min_size + rng.below(spec.max_size - spec.min_size + 1);
    needed += s;
  }
  if (needed >= pool.size())
    throw ValidationError("insufficient nodes: fragments need " + std::to_string(needed) +
                          " nodes, source community has " + std::to_string(pool.size()) + " free");
  rng.shuffle(std::span<NodeId>(pool));

  std::vector<std::int32_t> group(n, -1);
  for (std::size_t i = 0; i < corpus.fragments.size(); ++i)
    for (const auto v : corpus.fragments[i]) group[v] = static_cast<std::int32_t>(i);
  std::size_t offset = 0;
  const std::size_t first_new = corpus.fragments.size();
  for (const auto s : sizes) {
    std::vector<NodeId> members(pool.begin() + offset, pool.begin() + offset + s);
    offset += s;
    for (const auto v : members) group[v] = static_cast<std::int32_t>(corpus.fragments.size());
    corpus.fragments.push_back(std::move(members));
  }

  std::vector<Arc> arcs;
  std::set<std::pair<NodeId, NodeId>> present;
  for (const auto& a : corpus.graph.directed_edges()) {
    const bool cut = group[a.citing] != group[a.cited] &&
                     (group[a.citing] >= std::int32_t(first_new) || group[a.cited] >= std::int32_t(first_new));
    if (cut) continue;
    arcs.push_back(a);
    present.emplace(std::min(a.citing, a.cited), std::max(a.citing, a.cited));
  }
  // Random spanning tree per new fragment: each node links to an earlier one.
  for (std::size_t f = first_new; f < corpus.fragments.size(); ++f) {
    auto order = corpus.fragments[f];
    rng.shuffle(std::span<NodeId>(order));
    for (std::size_t i = 1; i < order.size(); ++i) {
      const NodeId a = order[i];
      const NodeId b = order[rng.below(i)];
      if (!present.emplace(std::min(a, b), std::max(a, b)).second) continue;
      const Arc arc = rng.below(2) ? Arc{a, b} : Arc{b, a};
      arcs.push_back(arc);
      corpus.records[arc.citing].refs.push_back(corpus.graph.id_of(arc.cited));
    }
  }
  corpus.graph = CorpusGraph(corpus.graph.ids(), std::move(arcs));
}

SynthCorpus synth_preset(const std::string& name, std::uint64_t seed) {
  if (name == "paper-mini") {
    PlantedSpec spec;
    spec.community_sizes = {2000, 1000};
    spec.community_labels = {"Mathematics", "OR&MS"};
    spec.p_intra = 0.01;
    spec.p_inter = 0.0005;
    spec.embed_dim = 64;
    spec.center_cosine = 0.3;
    spec.noise_sigma = 0.1;
    spec.dual_label_fraction = 0.005;
    spec.external_refs = 2;
    spec.seed = derive_seed(seed, "synth.planted");
    SynthCorpus corpus = planted_graph(spec);
    fragment(corpus, {20, 8, 20, 0, derive_seed(seed, "synth.fragment.0")});
    fragment(corpus, {10, 8, 20, 1, derive_seed(seed, "synth.fragment.1")});
    // At lower resolutions the two communities merge into one cluster.
    corpus.suggested_config = {{"resolution", "0.3"}, {"size_threshold", "1000"}};
    return corpus;
  }
  if (name == "tiny") {
    PlantedSpec spec;
    spec.community_sizes = {60, 40};
    spec.community_labels = {"Mathematics", "OR&MS"};
    spec.p_intra = 0.15;
    spec.p_inter = 0.005;
    spec.embed_dim = 16;
    spec.external_refs = 1;
    spec.seed = derive_seed(seed, "synth.planted");
    SynthCorpus corpus = planted_graph(spec);
    fragment(corpus, {3, 4, 6, 0, derive_seed(seed, "synth.fragment.0")});
    corpus.suggested_config = {{"resolution", "0.5"}, {"size_threshold", "10"}};
    return corpus;
  }
  throw ValidationError("unknown synth preset: " + name);
}

void write_synth_corpus(const std::filesystem::path& dir, const SynthCorpus& corpus) {
  std::filesystem::create_directories(dir);
  write_metadata(dir / "metadata.jsonl", corpus.records);
  std::vector<RawEdge> edges;
  edges.reserve(corpus.graph.directed_edges().size());
  for (const auto& a : corpus.graph.directed_edges())
    edges.push_back({corpus.graph.id_of(a.citing), corpus.graph.id_of(a.cited)});
  write_edges(dir / "edges.tsv", edges);
  save_embeddings(dir / "vectors.emb", dir / "ids.txt", corpus.embeddings, corpus.graph.ids());
  {
    std::ofstream out(dir / "coverage.tsv", std::ios::binary);
    if (!out) throw RuntimeFailure("cannot write coverage.tsv");
    for (const auto& [id, year] : corpus.coverage_entries) out << id << '\t' << year << '\n';
  }
  {
    std::ofstream out(dir / "planted.csv", std::ios::binary);
    if (!out) throw RuntimeFailure("cannot write planted.csv");
    out << "pub_id,cluster\n";
    for (NodeId i = 0; i < corpus.graph.n(); ++i) out << corpus.graph.id_of(i) << ',' << corpus.community[i] << '\n';
  }
  // Starter configuration. LCC and pruning are off: both would delete the
  // planted fragments before clustering sees them.
  const auto abs = std::filesystem::absolute(dir);
  std::ofstream out(dir / "pipeline.conf", std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write pipeline.conf");
  out << "metadata = " << (abs / "metadata.jsonl").string() << '\n'
      << "edges = " << (abs / "edges.tsv").string() << '\n'
      << "vectors = " << (abs / "vectors.emb").string() << '\n'
      << "ids = " << (abs / "ids.txt").string() << '\n'
      << "coverage = " << (abs / "coverage.tsv").string() << '\n'
      << "out_dir = " << (abs / "out").string() << '\n'
      << "lcc = false\nprune = false\n";
  for (const auto& [key, value] : corpus.suggested_config) out << key << " = " << value << '\n';
}

}  // namespace citeweave
