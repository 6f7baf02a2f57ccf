#include "citeweave/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "citeweave/error.hpp"

namespace citeweave {

namespace {

using json = nlohmann::json;

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return in;
}

std::vector<std::string> string_array(const json& obj, const char* key,
                                      const std::string& where) {
  std::vector<std::string> out;
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return out;
  if (!it->is_array()) throw ValidationError(where + ": \"" + key + "\" must be an array of strings");
  for (const auto& v : *it) {
    if (!v.is_string()) throw ValidationError(where + ": \"" + key + "\" must be an array of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::string optional_string(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return {};
  if (!it->is_string()) throw ValidationError(where + ": \"" + key + "\" must be a string");
  return it->get<std::string>();
}

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), NodeId{0});
  }

  NodeId find(NodeId x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(NodeId a, NodeId b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
  }

 private:
  std::vector<NodeId> parent_;
  std::vector<std::uint8_t> rank_;
};

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace

bool PublicationRecord::has_label(std::string_view label) const {
  return std::find(labels.begin(), labels.end(), label) != labels.end();
}

CorpusGraph::CorpusGraph(std::vector<std::string> ids, std::vector<Arc> arcs)
    : id_of_(std::move(ids)), directed_(std::move(arcs)) {
  index_of_.reserve(id_of_.size());
  for (NodeId i = 0; i < id_of_.size(); ++i) {
    if (!index_of_.emplace(id_of_[i], i).second)
      throw ValidationError("duplicate pub_id: " + id_of_[i]);
  }
  for (const auto& a : directed_) {
    if (a.citing >= id_of_.size() || a.cited >= id_of_.size())
      throw ValidationError("arc endpoint out of range");
  }
  std::sort(directed_.begin(), directed_.end());
  directed_.erase(std::unique(directed_.begin(), directed_.end()), directed_.end());
  undirected_ = undirected_projection(directed_);
}

std::optional<NodeId> CorpusGraph::index_of(const std::string& id) const {
  auto it = index_of_.find(id);
  if (it == index_of_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::size_t> CorpusGraph::degrees() const {
  std::vector<std::size_t> deg(n(), 0);
  for (const auto& e : undirected_) {
    ++deg[e.u];
    ++deg[e.v];
  }
  return deg;
}

CorpusGraph CorpusGraph::induced(const std::vector<NodeId>& keep) const {
  constexpr NodeId kDropped = static_cast<NodeId>(-1);
  std::vector<NodeId> remap(n(), kDropped);
  std::vector<std::string> ids;
  ids.reserve(keep.size());
  for (NodeId k = 0; k < keep.size(); ++k) {
    remap[keep[k]] = k;
    ids.push_back(id_of_[keep[k]]);
  }
  std::vector<Arc> arcs;
  for (const auto& a : directed_) {
    if (remap[a.citing] != kDropped && remap[a.cited] != kDropped)
      arcs.push_back({remap[a.citing], remap[a.cited]});
  }
  return CorpusGraph(std::move(ids), std::move(arcs));
}

std::vector<PublicationRecord> read_metadata(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<PublicationRecord> records;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string where = path.filename().string() + ":" + std::to_string(line_no);
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError(where + ": malformed JSON (" + e.what() + ")");
    }
    if (!obj.is_object()) throw ValidationError(where + ": expected a JSON object");

    PublicationRecord rec;
    rec.pub_id = optional_string(obj, "id", where);
    if (rec.pub_id.empty()) throw ValidationError(where + ": missing \"id\"");
    rec.title = optional_string(obj, "title", where);
    rec.abstract = optional_string(obj, "abstract", where);
    if (auto it = obj.find("year"); it != obj.end() && !it->is_null()) {
      if (!it->is_number_integer()) throw ValidationError(where + ": \"year\" must be an integer");
      rec.year = it->get<int>();
    }
    rec.labels = string_array(obj, "labels", where);
    rec.refs = string_array(obj, "refs", where);
    if (!seen.insert(rec.pub_id).second)
      throw ValidationError(where + ": duplicate pub_id " + rec.pub_id);
    records.push_back(std::move(rec));
  }
  return records;
}

void write_metadata(const std::filesystem::path& path,
                    const std::vector<PublicationRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  for (const auto& r : records) {
    json obj = {{"id", r.pub_id}, {"title", r.title}, {"abstract", r.abstract}};
    obj["year"] = r.year ? json(*r.year) : json(nullptr);
    obj["labels"] = r.labels;
    obj["refs"] = r.refs;
    out << obj.dump() << '\n';
  }
}

void write_edges(const std::filesystem::path& path, const std::vector<RawEdge>& edges) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  for (const auto& e : edges) out << e.citing << '\t' << e.cited << '\n';
}

LoadedCorpus load_corpus(const std::filesystem::path& metadata_path,
                         const std::filesystem::path& edges_path) {
  LoadedCorpus corpus;
  corpus.records = read_metadata(metadata_path);

  std::unordered_set<std::string> known;
  known.reserve(corpus.records.size());
  for (const auto& r : corpus.records) known.insert(r.pub_id);

  auto in = open_input(edges_path);
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  std::size_t line_no = 0;
  auto& report = corpus.report;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size() ||
        line.find('\t', tab + 1) != std::string::npos) {
      throw ValidationError(edges_path.filename().string() + ":" + std::to_string(line_no) +
                            ": expected two tab-separated columns");
    }
    ++report.edge_lines;
    RawEdge edge{line.substr(0, tab), line.substr(tab + 1)};
    if (!seen.emplace(edge.citing, edge.cited).second) {
      ++report.duplicate_edges;
      continue;
    }
    if (!known.contains(edge.citing) || !known.contains(edge.cited)) {
      ++report.unmatched_edges;
      report.unmatched.push_back(std::move(edge));
      continue;
    }
    corpus.edges.push_back(std::move(edge));
  }
  return corpus;
}

std::size_t normalized_length(std::string_view text) {
  std::size_t count = 0;
  bool pending_space = false;
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_space(c)) {
      pending_space = count > 0;
      continue;
    }
    if (pending_space) {
      ++count;
      pending_space = false;
    }
    // UTF-8 continuation bytes do not start a scalar value.
    if ((c & 0xC0) != 0x80) ++count;
  }
  return count;
}

std::vector<PublicationRecord> apply_filters(const std::vector<PublicationRecord>& records,
                                             const FilterOptions& options,
                                             FilterReport& report) {
  if (options.year_window.first > options.year_window.last)
    throw ValidationError("year window is empty");
  report.records_in = records.size();
  report.missing_metadata = report.abstract_too_short = report.outside_year_window = 0;
  report.unlabeled = 0;
  std::vector<PublicationRecord> out;
  for (const auto& r : records) {
    if (r.pub_id.empty() || r.title.empty() || !r.year) {
      ++report.missing_metadata;
    } else if (normalized_length(r.abstract) < options.min_abstract_chars) {
      ++report.abstract_too_short;
    } else if (!options.year_window.contains(*r.year)) {
      ++report.outside_year_window;
    } else {
      if (r.labels.empty()) ++report.unlabeled;
      out.push_back(r);
    }
  }
  report.records_out = out.size();
  return out;
}

CorpusGraph build_graph(const std::vector<PublicationRecord>& records,
                        const std::vector<RawEdge>& edges, FilterReport& report) {
  std::vector<std::string> ids;
  ids.reserve(records.size());
  for (const auto& r : records) ids.push_back(r.pub_id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw ValidationError("duplicate pub_id in records");

  std::unordered_map<std::string, NodeId> index;
  index.reserve(ids.size());
  for (NodeId i = 0; i < ids.size(); ++i) index.emplace(ids[i], i);

  report.edges_in = edges.size();
  report.edges_endpoint_filtered = report.self_citations = 0;
  std::vector<Arc> arcs;
  arcs.reserve(edges.size());
  for (const auto& e : edges) {
    auto a = index.find(e.citing);
    auto b = index.find(e.cited);
    if (a == index.end() || b == index.end()) {
      ++report.edges_endpoint_filtered;
      continue;
    }
    if (a->second == b->second) {
      ++report.self_citations;
      continue;
    }
    arcs.push_back({a->second, b->second});
  }
  CorpusGraph graph(std::move(ids), std::move(arcs));
  // Input edges are already unique, so arcs only shrink by the counted rules.
  report.edges_out = graph.directed_edges().size();
  return graph;
}

std::size_t connected_components(std::size_t n, const std::vector<Edge>& edges,
                                 std::vector<NodeId>& label) {
  DisjointSet dsu(n);
  for (const auto& e : edges) dsu.unite(e.u, e.v);
  constexpr NodeId kUnset = static_cast<NodeId>(-1);
  std::vector<NodeId> root_label(n, kUnset);
  label.assign(n, 0);
  NodeId next = 0;
  for (NodeId i = 0; i < n; ++i) {
    const NodeId r = dsu.find(i);
    if (root_label[r] == kUnset) root_label[r] = next++;
    label[i] = root_label[r];
  }
  return next;
}

CorpusGraph largest_component(const CorpusGraph& graph, FilterReport* report) {
  std::vector<NodeId> label;
  const std::size_t count = connected_components(graph.n(), graph.undirected_edges(), label);
  std::vector<NodeId> keep;
  if (count > 0) {
    std::vector<std::size_t> size(count, 0);
    for (const NodeId l : label) ++size[l];
    // Labels are numbered by smallest member, so the first maximum wins ties.
    const auto best = static_cast<NodeId>(std::max_element(size.begin(), size.end()) - size.begin());
    for (NodeId i = 0; i < graph.n(); ++i)
      if (label[i] == best) keep.push_back(i);
  }
  if (report) {
    report->lcc_nodes_in = graph.n();
    report->lcc_nodes_out = keep.size();
    report->outside_lcc = graph.n() - keep.size();
  }
  return graph.induced(keep);
}

CorpusGraph prune_degree_one(const CorpusGraph& graph, bool to_fixpoint, FilterReport* report) {
  CorpusGraph current = graph;
  for (;;) {
    const auto deg = current.degrees();
    std::vector<NodeId> keep;
    for (NodeId i = 0; i < current.n(); ++i)
      if (deg[i] != 1) keep.push_back(i);
    const bool changed = keep.size() != current.n();
    if (changed) current = current.induced(keep);
    if (!to_fixpoint || !changed) break;
  }
  if (report) {
    report->prune_nodes_in = graph.n();
    report->prune_nodes_out = current.n();
    report->degree_one = graph.n() - current.n();
  }
  return current;
}

std::vector<Edge> undirected_projection(const std::vector<Arc>& arcs) {
  std::vector<Edge> edges;
  edges.reserve(arcs.size());
  for (const auto& a : arcs) {
    if (a.citing == a.cited) continue;
    edges.push_back({std::min(a.citing, a.cited), std::max(a.citing, a.cited)});
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

std::vector<PublicationRecord> align_records(const std::vector<PublicationRecord>& records,
                                             const CorpusGraph& graph) {
  std::vector<PublicationRecord> out(graph.n());
  for (const auto& r : records) {
    if (auto i = graph.index_of(r.pub_id)) out[*i] = r;
  }
  for (NodeId i = 0; i < graph.n(); ++i) {
    if (out[i].pub_id.empty()) throw ValidationError("no record for node " + graph.id_of(i));
  }
  return out;
}

std::string filter_report_json(const FilterReport& r) {
  json unmatched = json::array();
  for (const auto& e : r.unmatched) unmatched.push_back({e.citing, e.cited});
  json j = {
      {"load", {{"edge_lines", r.edge_lines}, {"duplicate_edges", r.duplicate_edges},
                {"unmatched_edges", r.unmatched_edges}, {"unmatched", unmatched}}},
      {"records", {{"input", r.records_in}, {"missing_metadata", r.missing_metadata},
                   {"abstract_too_short", r.abstract_too_short},
                   {"outside_year_window", r.outside_year_window}, {"survivors", r.records_out},
                   {"unlabeled_flagged", r.unlabeled}}},
      {"edges", {{"input", r.edges_in}, {"endpoint_filtered", r.edges_endpoint_filtered},
                 {"self_citations", r.self_citations}, {"survivors", r.edges_out}}},
      {"largest_component", {{"input", r.lcc_nodes_in}, {"outside_lcc", r.outside_lcc},
                             {"survivors", r.lcc_nodes_out}}},
      {"degree_one", {{"input", r.prune_nodes_in}, {"removed", r.degree_one},
                      {"survivors", r.prune_nodes_out}}},
  };
  return j.dump(2);
}

}  // namespace citeweave
