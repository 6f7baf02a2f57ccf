// citeweave command-line front end.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numeric>

#include <CLI11.hpp>
#include <json.hpp>

#include "citeweave/augment.hpp"
#include "citeweave/community.hpp"
#include "citeweave/corpus.hpp"
#include "citeweave/embedding.hpp"
#include "citeweave/error.hpp"
#include "citeweave/knn.hpp"
#include "citeweave/metrics.hpp"
#include "citeweave/pipeline.hpp"
#include "citeweave/rng.hpp"
#include "citeweave/synth.hpp"

namespace fs = std::filesystem;
using namespace citeweave;
using json = nlohmann::json;

namespace {

struct Options {
  std::string config;
  std::string manifest;
  std::string out = "out";
  std::string metadata, edges, vectors, ids, coverage, partition, augmented;
  std::string preset = "paper-mini";
  std::size_t k = 10;
  double alpha = 0.5;
  double resolution = 0.05;
  int restarts = 1;
  std::string quality = "rb";
  bool weighted = true;
  std::size_t small_threshold = 1000;
  std::uint64_t seed = 42;
  std::size_t kmeans_k = 2;
  int workers = 0;
  std::size_t batch_size = 64;
};

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << text << '\n';
}

// Records and graph of an already-ingested corpus, no filtering.
struct Stored {
  std::vector<PublicationRecord> records;
  CorpusGraph graph;
};

Stored load_stored(const Options& o) {
  if (o.metadata.empty() || o.edges.empty())
    throw ValidationError("--metadata and --edges are required");
  auto loaded = load_corpus(o.metadata, o.edges);
  Stored s;
  s.graph = build_graph(loaded.records, loaded.edges, loaded.report);
  s.records = align_records(loaded.records, s.graph);
  return s;
}

EmbeddingMatrix load_bound(const Options& o, const CorpusGraph& graph) {
  if (o.vectors.empty() || o.ids.empty()) throw ValidationError("--vectors and --ids are required");
  return normalize_rows(bind_to_graph(load_embeddings(o.vectors, o.ids), graph, true));
}

QualityConfig quality_config(const Options& o, const std::string& stage) {
  QualityConfig q;
  q.function = parse_quality_function(o.quality);
  q.resolution = o.resolution;
  q.restarts = o.restarts;
  q.use_weights = o.weighted;
  q.seed = derive_seed(o.seed, stage);
  return q;
}

void out_dir(const Options& o) { fs::create_directories(o.out); }

void cmd_ingest(const Options& o) {
  PipelineConfig cfg;
  if (!o.config.empty()) apply_config_file(cfg, o.config);
  if (!o.metadata.empty()) cfg.metadata = o.metadata;
  if (!o.edges.empty()) cfg.edges = o.edges;
  if (cfg.metadata.empty() || cfg.edges.empty())
    throw ValidationError("--metadata and --edges are required");
  const auto prepared = prepare_corpus(cfg);
  out_dir(o);
  write_metadata(fs::path(o.out) / "metadata.jsonl", prepared.records);
  std::vector<RawEdge> edges;
  for (const auto& a : prepared.graph.directed_edges())
    edges.push_back({prepared.graph.id_of(a.citing), prepared.graph.id_of(a.cited)});
  write_edges(fs::path(o.out) / "edges.tsv", edges);
  write_file(fs::path(o.out) / "filter_report.json", filter_report_json(prepared.report));
  std::cout << "nodes " << prepared.graph.n() << " edges " << prepared.graph.undirected_edges().size()
            << '\n';
}

void cmd_cluster(const Options& o) {
  const auto s = load_stored(o);
  const auto pairs = o.augmented.empty() ? unit_pairs(s.graph.undirected_edges())
                                         : read_augmented_pairs(o.augmented, s.graph, o.weighted);
  const auto q = quality_config(o, "cluster");
  const auto result = leiden(pairs, s.graph.n(), q);
  out_dir(o);
  write_partition_csv(fs::path(o.out) / "partition.csv", result.partition, s.graph);
  json report = {{"quality_function", to_string(q.function)},
                 {"resolution", q.resolution},
                 {"seed", std::to_string(o.seed)},
                 {"quality", result.quality},
                 {"passes", result.passes},
                 {"clusters", result.partition.cluster_count()},
                 {"sizes", cluster_size_distribution(result.partition)}};
  write_file(fs::path(o.out) / "cluster_report.json", report.dump(2));
  std::cout << "clusters " << result.partition.cluster_count() << " quality " << result.quality << '\n';
}

void cmd_augment(const Options& o) {
  const auto s = load_stored(o);
  const auto emb = load_bound(o, s.graph);
  Partition base;
  if (!o.partition.empty()) {
    base = read_partition_csv(o.partition, s.graph);
  } else {
    auto q = quality_config(o, "leiden.baseline");
    q.use_weights = false;
    base = leiden(unit_pairs(s.graph.undirected_edges()), s.graph.n(), q).partition;
  }
  const auto small = select_small_cluster_nodes(base, o.small_threshold);
  std::vector<NodeId> all(s.graph.n());
  std::iota(all.begin(), all.end(), NodeId{0});
  std::vector<TextualEdge> textual;
  if (!small.empty()) textual = neighbor_lists_to_edges(knn_search(small, all, emb, o.k, o.workers).lists);
  const auto citing = weight_citation_edges(s.graph, emb, o.workers);
  const auto aug = blend(s.graph.n(), textual, citing, o.alpha);
  out_dir(o);
  write_textual_edges(fs::path(o.out) / "textual_edges.tsv", textual, s.graph);
  write_augmented_tsv(fs::path(o.out) / "augmented.tsv", aug, s.graph);
  write_file(fs::path(o.out) / "bookkeeping.json", bookkeeping_json(aug));
  std::cout << bookkeeping_json(aug) << '\n';
}

void cmd_weigh(const Options& o) {
  const auto s = load_stored(o);
  const auto emb = load_bound(o, s.graph);
  const auto citing = weight_citation_edges(s.graph, emb, o.workers);
  out_dir(o);
  std::ofstream out(fs::path(o.out) / "citing_weights.tsv", std::ios::binary);
  std::vector<double> w;
  char buf[32];
  for (const auto& e : citing) {
    std::snprintf(buf, sizeof buf, "%.6f", *e.w_textual);
    out << s.graph.id_of(e.u) << '\t' << s.graph.id_of(e.v) << '\t' << buf << '\n';
    w.push_back(*e.w_textual);
  }
  write_histogram_csv(fs::path(o.out) / "citing_weight_histogram.csv", weight_histogram(w));
}

void cmd_metrics(const Options& o) {
  const auto s = load_stored(o);
  if (o.partition.empty()) throw ValidationError("--partition is required");
  const auto p = read_partition_csv(o.partition, s.graph);
  out_dir(o);
  const fs::path dir = o.out;
  write_file(dir / "homogeneity.json", homogeneity_json(homogeneity(p, s.records)));
  write_file(dir / "sizes.json", json(cluster_size_distribution(p)).dump());
  if (o.augmented.empty())
    write_link_matrix_csv(dir / "link_matrix.csv", link_distribution(p, s.graph.undirected_edges()));
  else
    write_link_matrix_csv(dir / "link_matrix.csv",
                          link_distribution(p, read_augmented_pairs(o.augmented, s.graph, false)));
  std::map<std::string, std::size_t> count;
  for (const auto& r : s.records)
    for (const auto& l : r.labels) ++count[l];
  std::vector<std::pair<std::string, std::size_t>> ranked(count.begin(), count.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](auto& a, auto& b) { return a.second > b.second; });
  const std::string a = ranked.size() > 0 ? ranked[0].first : "";
  const std::string b = ranked.size() > 1 ? ranked[1].first : "";
  write_file(dir / "confusion.json", confusion_json(confusion(p, s.records, a, b)));
  if (!o.coverage.empty()) {
    const auto f = retention_funnel(s.records, CoverageIndex::read(o.coverage), YearWindow{}, s.graph,
                                    s.records);
    write_file(dir / "retention.json", funnel_json(f));
  }
}

void cmd_kmeans(const Options& o) {
  const auto s = load_stored(o);
  const auto emb = load_bound(o, s.graph);
  KMeansConfig kc;
  kc.k = o.kmeans_k;
  kc.seed = derive_seed(o.seed, "kmeans");
  kc.workers = o.workers;
  const auto r = kmeans(emb, kc);
  out_dir(o);
  write_partition_csv(fs::path(o.out) / "partition.csv", r.partition, s.graph);
  write_file(fs::path(o.out) / "kmeans_report.json",
             json{{"k", kc.k}, {"inertia", r.inertia}, {"iterations", r.iterations},
                  {"inertia_trace", r.inertia_trace}, {"sizes", r.partition.sizes()}}
                 .dump(2));
}

void cmd_synth(const Options& o) {
  const auto corpus = synth_preset(o.preset, o.seed);
  out_dir(o);
  write_synth_corpus(o.out, corpus);
  std::vector<NodeId> label;
  const auto components = connected_components(corpus.graph.n(), corpus.graph.undirected_edges(), label);
  std::cout << "nodes " << corpus.graph.n() << " edges " << corpus.graph.undirected_edges().size()
            << " components " << components << '\n';
}

void cmd_embed(const Options& o) {
  const char* url = std::getenv("CITEWEAVE_EMBED_URL");
  if (url == nullptr || *url == '\0') throw ValidationError("CITEWEAVE_EMBED_URL is not set");
  if (o.metadata.empty()) throw ValidationError("--metadata is required");
  const auto records = read_metadata(o.metadata);
  ServiceOptions so;
  so.endpoint = url;
  so.batch_size = o.batch_size;
  so.workers = static_cast<std::size_t>(std::max(1, o.workers));
  const auto m = embed_via_service(records, so);
  std::vector<std::string> ids;
  for (const auto& r : records) ids.push_back(r.pub_id);
  out_dir(o);
  save_embeddings(fs::path(o.out) / "vectors.emb", fs::path(o.out) / "ids.txt", m, ids);
}

void cmd_pipeline(const Options& o, const CLI::App& sub) {
  PipelineConfig cfg;
  if (!o.manifest.empty()) cfg = config_from_manifest(o.manifest);
  if (!o.config.empty()) apply_config_file(cfg, o.config);
  auto given = [&](const char* name) { return sub.get_option(name)->count() > 0; };
  if (given("--out")) cfg.out_dir = o.out;
  if (given("--metadata")) cfg.metadata = o.metadata;
  if (given("--edges")) cfg.edges = o.edges;
  if (given("--vectors")) cfg.vectors = o.vectors;
  if (given("--ids")) cfg.ids = o.ids;
  if (given("--coverage")) cfg.coverage = o.coverage;
  if (given("--k")) cfg.k = o.k;
  if (given("--alpha")) cfg.alpha = o.alpha;
  if (given("--resolution")) cfg.resolution = o.resolution;
  if (given("--restarts")) cfg.restarts = o.restarts;
  if (given("--quality")) cfg.quality_function = parse_quality_function(o.quality);
  if (given("--weighted") || given("--unweighted")) cfg.use_weights = o.weighted;
  if (given("--small-threshold")) cfg.size_threshold = o.small_threshold;
  if (given("--seed")) cfg.seed = o.seed;
  if (given("--kmeans-k")) cfg.kmeans_k = o.kmeans_k;
  if (given("--workers")) cfg.workers = o.workers;
  run_pipeline(cfg);
  std::cout << "wrote " << (cfg.out_dir / "manifest.json").string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"citeweave: semantic repair of fragmented citation networks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  Options o;

  auto common = [&](CLI::App* s) {
    s->add_option("--config", o.config, "key = value configuration file");
    s->add_option("--out", o.out, "output directory");
    s->add_option("--seed", o.seed, "master seed");
    s->add_option("--workers", o.workers, "threads for parallel kernels (0 = default)");
  };
  auto graph_inputs = [&](CLI::App* s) {
    s->add_option("--metadata", o.metadata, "metadata JSON Lines");
    s->add_option("--edges", o.edges, "citing<TAB>cited edges");
  };
  auto vector_inputs = [&](CLI::App* s) {
    s->add_option("--vectors", o.vectors, "EMB1 vectors file");
    s->add_option("--ids", o.ids, "row ids, one per line");
  };
  auto clustering = [&](CLI::App* s) {
    s->add_option("--resolution", o.resolution, "resolution parameter");
    s->add_option("--restarts", o.restarts, "independent Leiden runs, best kept")->check(CLI::PositiveNumber);
    s->add_option("--quality", o.quality, "quality function")->check(CLI::IsMember({"rb", "cpm"}));
    s->add_flag("--weighted,!--unweighted", o.weighted, "use edge weights");
  };
  auto augmentation = [&](CLI::App* s) {
    s->add_option("--k", o.k, "neighbors per small-cluster node");
    s->add_option("--alpha", o.alpha, "blend weight of the textual signal");
    s->add_option("--small-threshold", o.small_threshold, "largest cluster size counted as small");
  };

  auto* ingest = app.add_subcommand("ingest", "filter a corpus and store the graph");
  common(ingest);
  graph_inputs(ingest);

  auto* cluster = app.add_subcommand("cluster", "Leiden clustering of a stored graph");
  common(cluster);
  graph_inputs(cluster);
  clustering(cluster);
  cluster->add_option("--augmented", o.augmented, "cluster an augmented TSV instead of citations");

  auto* augment = app.add_subcommand("augment", "kNN repair and blend");
  common(augment);
  graph_inputs(augment);
  vector_inputs(augment);
  clustering(augment);
  augmentation(augment);
  augment->add_option("--partition", o.partition, "baseline partition CSV");

  auto* weigh = app.add_subcommand("weigh", "cosine weights for citation edges");
  common(weigh);
  graph_inputs(weigh);
  vector_inputs(weigh);

  auto* metrics = app.add_subcommand("metrics", "reports for a partition");
  common(metrics);
  graph_inputs(metrics);
  metrics->add_option("--partition", o.partition, "partition CSV")->required();
  metrics->add_option("--augmented", o.augmented, "count links over an augmented TSV");
  metrics->add_option("--coverage", o.coverage, "coverage list for the retention funnel");

  auto* km = app.add_subcommand("kmeans", "k-means on the embeddings");
  common(km);
  graph_inputs(km);
  vector_inputs(km);
  km->add_option("--kmeans-k", o.kmeans_k, "number of clusters");

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  common(synth);
  synth->add_option("--preset", o.preset, "preset name")->check(CLI::IsMember({"paper-mini", "tiny"}));

  auto* embed = app.add_subcommand("embed", "embed records through the service at CITEWEAVE_EMBED_URL");
  common(embed);
  graph_inputs(embed);
  embed->add_option("--batch-size", o.batch_size, "texts per request");

  auto* pipeline = app.add_subcommand("pipeline", "run every stage from a configuration");
  common(pipeline);
  graph_inputs(pipeline);
  vector_inputs(pipeline);
  clustering(pipeline);
  augmentation(pipeline);
  pipeline->add_option("--coverage", o.coverage, "coverage list for the retention funnel");
  pipeline->add_option("--kmeans-k", o.kmeans_k, "also run k-means with this many clusters");
  pipeline->add_option("--manifest", o.manifest, "re-run the configuration of a manifest");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*ingest) cmd_ingest(o);
    else if (*cluster) cmd_cluster(o);
    else if (*augment) cmd_augment(o);
    else if (*weigh) cmd_weigh(o);
    else if (*metrics) cmd_metrics(o);
    else if (*km) cmd_kmeans(o);
    else if (*synth) cmd_synth(o);
    else if (*embed) cmd_embed(o);
    else if (*pipeline) cmd_pipeline(o, *pipeline);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
