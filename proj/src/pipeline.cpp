#include "citeweave/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "citeweave/augment.hpp"
#include "citeweave/embedding.hpp"
#include "citeweave/error.hpp"
#include "citeweave/knn.hpp"
#include "citeweave/metrics.hpp"
#include "citeweave/rng.hpp"

namespace citeweave {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ValidationError("config " + key + ": expected a boolean, got \"" + v + "\"");
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  std::istringstream in(v);
  T out{};
  in >> out;
  if (!in || !in.eof()) throw ValidationError("config " + key + ": bad number \"" + v + "\"");
  return out;
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << text << '\n';
}

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& value) {
  if (key == "metadata") metadata = value;
  else if (key == "edges") edges = value;
  else if (key == "vectors") vectors = value;
  else if (key == "ids") ids = value;
  else if (key == "coverage") coverage = value;
  else if (key == "out_dir") out_dir = value;
  else if (key == "k") k = parse_number<std::size_t>(key, value);
  else if (key == "alpha") alpha = parse_number<double>(key, value);
  else if (key == "resolution") resolution = parse_number<double>(key, value);
  else if (key == "quality_function") quality_function = parse_quality_function(value);
  else if (key == "use_weights") use_weights = parse_bool(key, value);
  else if (key == "size_threshold") size_threshold = parse_number<std::size_t>(key, value);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "year_window") {
    const auto dash = value.find('-', 1);
    if (dash == std::string::npos) throw ValidationError("config year_window: expected FIRST-LAST");
    year_window = {parse_number<int>(key, trim(value.substr(0, dash))),
                   parse_number<int>(key, trim(value.substr(dash + 1)))};
  } else if (key == "min_abstract_chars") min_abstract_chars = parse_number<std::size_t>(key, value);
  else if (key == "lcc") lcc = parse_bool(key, value);
  else if (key == "prune") prune = parse_bool(key, value);
  else if (key == "prune_fixpoint") prune_fixpoint = parse_bool(key, value);
  else if (key == "knn_candidates") {
    if (value == "all") knn_global_candidates = true;
    else if (value == "small") knn_global_candidates = false;
    else throw ValidationError("config knn_candidates: expected all or small");
  } else if (key == "overlap_twice") overlap_twice = parse_bool(key, value);
  else if (key == "max_passes") max_passes = parse_number<int>(key, value);
  else if (key == "restarts") restarts = parse_number<int>(key, value);
  else if (key == "kmeans_k") kmeans_k = parse_number<std::size_t>(key, value);
  else if (key == "label_pair") label_pair = value;
  else if (key == "workers") workers = parse_number<int>(key, value);
  else throw ValidationError("unknown config key: " + key);
}

std::map<std::string, std::string> PipelineConfig::to_map() const {
  return {
      {"metadata", metadata.string()},
      {"edges", edges.string()},
      {"vectors", vectors.string()},
      {"ids", ids.string()},
      {"coverage", coverage.string()},
      {"out_dir", out_dir.string()},
      {"k", std::to_string(k)},
      {"alpha", format_double(alpha)},
      {"resolution", format_double(resolution)},
      {"quality_function", to_string(quality_function)},
      {"use_weights", use_weights ? "true" : "false"},
      {"size_threshold", std::to_string(size_threshold)},
      {"seed", std::to_string(seed)},
      {"year_window", std::to_string(year_window.first) + "-" + std::to_string(year_window.last)},
      {"min_abstract_chars", std::to_string(min_abstract_chars)},
      {"lcc", lcc ? "true" : "false"},
      {"prune", prune ? "true" : "false"},
      {"prune_fixpoint", prune_fixpoint ? "true" : "false"},
      {"knn_candidates", knn_global_candidates ? "all" : "small"},
      {"overlap_twice", overlap_twice ? "true" : "false"},
      {"max_passes", std::to_string(max_passes)},
      {"restarts", std::to_string(restarts)},
      {"kmeans_k", std::to_string(kmeans_k)},
      {"label_pair", label_pair},
      {"workers", std::to_string(workers)},
  };
}

void PipelineConfig::validate() const {
  auto need = [](const std::filesystem::path& p, const char* key) {
    if (p.empty()) throw ValidationError(std::string("config ") + key + " is required");
    if (!std::filesystem::exists(p))
      throw ValidationError(std::string("config ") + key + ": file not found: " + p.string());
  };
  need(metadata, "metadata");
  need(edges, "edges");
  need(vectors, "vectors");
  need(ids, "ids");
  if (!coverage.empty()) need(coverage, "coverage");
  if (k == 0) throw ValidationError("k must be at least 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in [0, 1]");
  if (!(resolution > 0.0)) throw ValidationError("resolution must be positive");
  if (max_passes < 1) throw ValidationError("max_passes must be at least 1");
  if (restarts < 1) throw ValidationError("restarts must be at least 1");
  if (year_window.first > year_window.last) throw ValidationError("year_window is empty");
  if (!label_pair.empty() && label_pair.find(',') == std::string::npos)
    throw ValidationError("label_pair must be \"A,B\"");
}

void apply_config_file(PipelineConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

PipelineConfig read_config(const std::filesystem::path& path) {
  PipelineConfig cfg;
  apply_config_file(cfg, path);
  return cfg;
}

PipelineConfig config_from_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw ValidationError("cannot open manifest " + manifest_path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("malformed manifest: " + std::string(e.what()));
  }
  PipelineConfig cfg;
  for (const auto& [key, value] : j.at("config").items()) cfg.set(key, value.get<std::string>());
  return cfg;
}

// ---------------------------------------------------------------------------
// Pipeline

PreparedCorpus prepare_corpus(const PipelineConfig& cfg) {
  PreparedCorpus out;
  auto loaded = load_corpus(cfg.metadata, cfg.edges);
  out.report = loaded.report;
  const auto kept = apply_filters(loaded.records, {cfg.min_abstract_chars, cfg.year_window}, out.report);
  out.graph = build_graph(kept, loaded.edges, out.report);
  if (cfg.lcc) out.graph = largest_component(out.graph, &out.report);
  if (cfg.prune) out.graph = prune_degree_one(out.graph, cfg.prune_fixpoint, &out.report);
  out.records = align_records(kept, out.graph);
  out.all_records = std::move(loaded.records);
  return out;
}

namespace {

std::pair<std::string, std::string> choose_label_pair(const PipelineConfig& cfg,
                                                      const std::vector<PublicationRecord>& records) {
  if (!cfg.label_pair.empty()) {
    const auto comma = cfg.label_pair.find(',');
    return {trim(cfg.label_pair.substr(0, comma)), trim(cfg.label_pair.substr(comma + 1))};
  }
  std::map<std::string, std::size_t> count;
  for (const auto& r : records)
    for (const auto& l : r.labels) ++count[l];
  std::vector<std::pair<std::string, std::size_t>> ranked(count.begin(), count.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::pair<std::string, std::string> pair;
  if (!ranked.empty()) pair.first = ranked[0].first;
  if (ranked.size() > 1) pair.second = ranked[1].first;
  return pair;
}

/// Homogeneity of the largest cluster whose dominant label is `label`.
json label_homogeneity(const HomogeneityReport& h, const std::string& label) {
  for (const auto& c : h.clusters)
    if (c.dominant_label == label && c.homogeneity) return *c.homogeneity;
  return nullptr;
}

class StageRunner {
 public:
  explicit StageRunner(std::filesystem::path out_dir) : out_dir_(std::move(out_dir)) {}

  template <class Fn>
  auto run(const std::string& name, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    try {
      if constexpr (std::is_void_v<decltype(fn())>) {
        fn();
        finish(name, start);
      } else {
        auto result = fn();
        finish(name, start);
        return result;
      }
    } catch (const std::exception& e) {
      write_text(out_dir_ / "FAILED", "stage: " + name + "\ncause: " + e.what());
      throw;
    }
  }

  const json& timings() const { return timings_; }

 private:
  void finish(const std::string& name, std::chrono::steady_clock::time_point start) {
    const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start);
    timings_[name] = ms.count();
  }

  std::filesystem::path out_dir_;
  json timings_ = json::object();
};

}  // namespace

void run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  const auto& out = cfg.out_dir;
  std::filesystem::create_directories(out);
  std::filesystem::remove(out / "FAILED");
  StageRunner stage(out);

  json seeds = json::object();
  json summary = json::object();
  json rows = json::array();

  auto base_quality = [&](const std::string& stage_name) {
    QualityConfig q;
    q.function = cfg.quality_function;
    q.resolution = cfg.resolution;
    q.max_passes = cfg.max_passes;
    q.restarts = cfg.restarts;
    q.seed = derive_seed(cfg.seed, stage_name);
    seeds[stage_name] = std::to_string(q.seed);
    return q;
  };

  // ingest, filter, LCC, prune
  PreparedCorpus corpus = stage.run("ingest", [&] { return prepare_corpus(cfg); });
  write_text(out / "filter_report.json", filter_report_json(corpus.report));
  const auto& graph = corpus.graph;
  if (graph.n() == 0) {
    write_text(out / "FAILED", "stage: ingest\ncause: no nodes survived preprocessing");
    throw ValidationError("no nodes survived preprocessing");
  }
  const auto [first_label, second_label] = choose_label_pair(cfg, corpus.records);

  EmbeddingMatrix emb = stage.run("embeddings", [&] {
    return normalize_rows(bind_to_graph(load_embeddings(cfg.vectors, cfg.ids), graph, true));
  });

  auto report_partition = [&](const std::string& name, const Partition& p,
                              const auto& link_edges, std::optional<double> q, std::size_t edge_count) {
    const auto dir = out / name;
    std::filesystem::create_directories(dir);
    write_partition_csv(dir / "partition.csv", p, graph);
    const auto h = homogeneity(p, corpus.records);
    write_text(dir / "homogeneity.json", homogeneity_json(h));
    write_link_matrix_csv(dir / "link_matrix.csv", link_distribution(p, link_edges));
    write_text(dir / "confusion.json", confusion_json(confusion(p, corpus.records, first_label, second_label)));
    write_text(dir / "sizes.json", json(cluster_size_distribution(p)).dump());
    json row = {{"graph", name},
                {"edges", edge_count},
                {"clusters", p.cluster_count()},
                {"cluster1_size", p.cluster_count() > 0 ? json(p.sizes()[0]) : json(nullptr)},
                {"cluster2_size", p.cluster_count() > 1 ? json(p.sizes()[1]) : json(nullptr)},
                {first_label + "_homogeneity", label_homogeneity(h, first_label)},
                {second_label + "_homogeneity", label_homogeneity(h, second_label)}};
    if (q) row["quality"] = *q;
    rows.push_back(row);
  };

  // Baseline Leiden on the citation graph.
  const auto citing_pairs = unit_pairs(graph.undirected_edges());
  const auto base_cfg = base_quality("leiden.baseline");
  const LeidenResult baseline =
      stage.run("leiden.baseline", [&] { return leiden(citing_pairs, graph.n(), base_cfg); });
  report_partition("baseline", baseline.partition, graph.undirected_edges(), baseline.quality,
                   graph.undirected_edges().size());

  // S1: kNN repair for small-cluster nodes.
  const auto small = stage.run("select", [&] {
    return select_small_cluster_nodes(baseline.partition, cfg.size_threshold);
  });
  std::vector<NodeId> candidates;
  if (cfg.knn_global_candidates) {
    candidates.resize(graph.n());
    std::iota(candidates.begin(), candidates.end(), NodeId{0});
  } else {
    candidates = small;
  }
  KnnResult knn;
  std::vector<TextualEdge> textual;
  if (!small.empty()) {
    knn = stage.run("knn", [&] { return knn_search(small, candidates, emb, cfg.k, cfg.workers); });
    textual = neighbor_lists_to_edges(knn.lists);
  }
  write_textual_edges(out / "textual_edges.tsv", textual, graph);

  // S2: cosine-weighted citations, then the blend.
  const auto citing = stage.run("weigh", [&] { return weight_citation_edges(graph, emb, cfg.workers); });
  {
    std::vector<double> w;
    w.reserve(citing.size());
    for (const auto& e : citing) w.push_back(*e.w_textual);
    write_histogram_csv(out / "citing_weight_histogram.csv", weight_histogram(w));
  }
  const AugmentedGraph aug = stage.run("blend", [&] { return blend(graph.n(), textual, citing, cfg.alpha); });
  write_augmented_tsv(out / "augmented.tsv", aug, graph);
  write_text(out / "bookkeeping.json", bookkeeping_json(aug));
  if (!aug.bookkeeping.consistent()) throw RuntimeFailure("bookkeeping identity violated");

  // Leiden on the augmented graph.
  const auto unweighted = unweighted_view(aug, cfg.overlap_twice);
  auto unw_cfg = base_quality("leiden.augmented_unweighted");
  unw_cfg.use_weights = cfg.overlap_twice;
  const LeidenResult aug_unweighted = stage.run("leiden.augmented_unweighted",
                                                [&] { return leiden(unweighted, graph.n(), unw_cfg); });
  report_partition("augmented_unweighted", aug_unweighted.partition, unweighted, aug_unweighted.quality,
                   aug.edges.size());

  json weighted_summary = nullptr;
  if (cfg.use_weights) {
    const auto weighted = weighted_view(aug);
    const auto w_cfg = base_quality("leiden.augmented_weighted");
    const LeidenResult aug_weighted = stage.run("leiden.augmented_weighted",
                                                [&] { return leiden(weighted, graph.n(), w_cfg); });
    report_partition("augmented_weighted", aug_weighted.partition, weighted, aug_weighted.quality,
                     aug.edges.size());
    // Small clusters left after weighting and how many of their nodes have no
    // textual edge.
    std::vector<char> has_textual(graph.n(), 0);
    for (const auto& e : textual) has_textual[e.u] = has_textual[e.v] = 1;
    json small_clusters = json::array();
    const auto members = aug_weighted.partition.members();
    for (std::size_t c = 0; c < members.size(); ++c) {
      if (members[c].size() > cfg.size_threshold) continue;
      std::size_t without = 0;
      for (const auto v : members[c]) without += !has_textual[v];
      small_clusters.push_back({{"cluster", c}, {"size", members[c].size()}, {"nodes_without_textual_edges", without}});
    }
    weighted_summary = small_clusters;
  }

  if (cfg.kmeans_k > 0) {
    KMeansConfig kc;
    kc.k = cfg.kmeans_k;
    kc.seed = derive_seed(cfg.seed, "kmeans");
    kc.workers = cfg.workers;
    seeds["kmeans"] = std::to_string(kc.seed);
    const auto km = stage.run("kmeans", [&] { return kmeans(emb, kc); });
    report_partition("kmeans", km.partition, graph.undirected_edges(), std::nullopt, 0);
    rows.back()["edges"] = nullptr;
    rows.back()["inertia"] = km.inertia;
  }

  if (!cfg.coverage.empty()) {
    const auto funnel = stage.run("retention", [&] {
      std::vector<PublicationRecord> subset;
      for (const auto v : small) subset.push_back(corpus.records[v]);
      return retention_funnel(subset, CoverageIndex::read(cfg.coverage), cfg.year_window, graph,
                              corpus.all_records);
    });
    write_text(out / "retention.json", funnel_json(funnel));
  }

  summary["quality_function"] = to_string(cfg.quality_function);
  summary["resolution"] = cfg.resolution;
  summary["label_pair"] = {first_label, second_label};
  summary["small_cluster_nodes"] = small.size();
  summary["knn_short_queries"] = knn.short_queries;
  summary["bookkeeping"] = json::parse(bookkeeping_json(aug));
  summary["table"] = rows;
  summary["weighted_small_clusters"] = weighted_summary;
  write_text(out / "summary.json", summary.dump(2));

  json manifest = {{"tool_version", kToolVersion},
                   {"config", cfg.to_map()},
                   {"seeds", seeds},
                   {"bookkeeping", json::parse(bookkeeping_json(aug))},
                   {"timings_ms", stage.timings()}};
  write_text(out / "manifest.json", manifest.dump(2));
}

}  // namespace citeweave
