#include "citeweave/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "citeweave/error.hpp"

namespace citeweave {

using json = nlohmann::json;

HomogeneityReport homogeneity(const Partition& p, const std::vector<PublicationRecord>& records) {
  if (records.size() != p.n()) throw ValidationError("homogeneity: records do not match partition");
  HomogeneityReport report;
  std::vector<std::map<std::string, std::size_t>> tally(p.cluster_count());
  report.clusters.resize(p.cluster_count());
  for (ClusterId c = 0; c < p.cluster_count(); ++c) {
    report.clusters[c].cluster = c;
    report.clusters[c].size = p.sizes()[c];
  }
  for (NodeId i = 0; i < p.n(); ++i) {
    const auto& rec = records[i];
    if (rec.labels.empty()) {
      ++report.unlabeled_records;
      continue;
    }
    auto& cl = report.clusters[p[i]];
    ++cl.labeled;
    // A label repeated on one record still counts once.
    const std::set<std::string> distinct(rec.labels.begin(), rec.labels.end());
    for (const auto& label : distinct) ++tally[p[i]][label];
  }
  for (ClusterId c = 0; c < p.cluster_count(); ++c) {
    auto& cl = report.clusters[c];
    // std::map iterates labels in lexicographic order; strict > keeps the first.
    for (const auto& [label, count] : tally[c]) {
      if (count > cl.dominant_count) {
        cl.dominant_count = count;
        cl.dominant_label = label;
      }
    }
    if (cl.labeled > 0)
      cl.homogeneity = static_cast<double>(cl.dominant_count) / static_cast<double>(cl.labeled);
  }
  return report;
}

std::vector<std::size_t> cluster_size_distribution(const Partition& p) {
  auto sizes = p.sizes();
  std::sort(sizes.begin(), sizes.end(), std::greater<>());
  return sizes;
}

void LinkMatrix::add(std::size_t a, std::size_t b) {
  ++counts_[a * c_ + b];
  if (a != b) ++counts_[b * c_ + a];
}

std::size_t LinkMatrix::total() const {
  std::size_t t = 0;
  for (std::size_t a = 0; a < c_; ++a)
    for (std::size_t b = a; b < c_; ++b) t += at(a, b);
  return t;
}

LinkMatrix link_distribution(const Partition& p, const std::vector<Edge>& edges) {
  LinkMatrix m(p.cluster_count());
  for (const auto& e : edges) m.add(p[e.u], p[e.v]);
  return m;
}

LinkMatrix link_distribution(const Partition& p, const std::vector<WeightedPair>& edges) {
  LinkMatrix m(p.cluster_count());
  for (const auto& e : edges) m.add(p[e.u], p[e.v]);
  return m;
}

ConfusionTable confusion(const Partition& p, const std::vector<PublicationRecord>& records,
                         const std::string& first_label, const std::string& second_label) {
  if (records.size() != p.n()) throw ValidationError("confusion: records do not match partition");
  ConfusionTable t{first_label, second_label, std::vector<ConfusionRow>(p.cluster_count())};
  for (NodeId i = 0; i < p.n(); ++i) {
    const auto& rec = records[i];
    auto& row = t.rows[p[i]];
    if (rec.labels.empty()) {
      ++row.unlabeled;
      continue;
    }
    const bool a = rec.has_label(first_label);
    const bool b = rec.has_label(second_label);
    if (a && b) {
      ++row.both;
    } else if (a) {
      ++row.first_only;
    } else if (b) {
      ++row.second_only;
    } else {
      ++row.other;
    }
  }
  return t;
}

CoverageIndex CoverageIndex::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  CoverageIndex idx;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      idx.add(line);
      continue;
    }
    try {
      idx.add(line.substr(0, tab), std::stoi(line.substr(tab + 1)));
    } catch (const std::exception&) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": bad year");
    }
  }
  return idx;
}

void CoverageIndex::add(const std::string& id, std::optional<int> year) {
  auto [it, inserted] = years_.emplace(id, year);
  if (!inserted && year) it->second = year;
}

std::optional<int> CoverageIndex::year_of(const std::string& id) const {
  auto it = years_.find(id);
  return it == years_.end() ? std::nullopt : it->second;
}

namespace {

double percent(std::size_t part, std::size_t whole) {
  return whole == 0 ? 0.0 : 100.0 * static_cast<double>(part) / static_cast<double>(whole);
}

}  // namespace

double RetentionFunnel::coverage_pct() const { return percent(in_coverage, total_refs); }
double RetentionFunnel::window_pct() const { return percent(in_window, total_refs); }
double RetentionFunnel::graph_pct() const { return percent(in_graph, total_refs); }

RetentionFunnel retention_funnel(const std::vector<PublicationRecord>& records,
                                 const CoverageIndex& coverage, const YearWindow& window,
                                 const CorpusGraph& graph,
                                 const std::vector<PublicationRecord>& year_source) {
  std::unordered_map<std::string, int> known_years;
  for (const auto& r : year_source)
    if (r.year) known_years.emplace(r.pub_id, *r.year);
  const auto& arcs = graph.directed_edges();  // sorted

  RetentionFunnel f;
  for (const auto& rec : records) {
    const auto from = graph.index_of(rec.pub_id);
    for (const auto& ref : rec.refs) {
      ++f.total_refs;
      if (!coverage.covers(ref)) continue;
      ++f.in_coverage;
      std::optional<int> year = coverage.year_of(ref);
      if (!year) {
        if (auto it = known_years.find(ref); it != known_years.end()) year = it->second;
      }
      if (!year || !window.contains(*year)) continue;
      ++f.in_window;
      const auto to = graph.index_of(ref);
      if (from && to && std::binary_search(arcs.begin(), arcs.end(), Arc{*from, *to})) ++f.in_graph;
    }
  }
  f.defined = f.total_refs > 0;
  return f;
}

double round_half_up(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  // The epsilon absorbs representation error such as 17.125 -> 17.12499...
  return std::floor(value * scale + 0.5 + 1e-9) / scale;
}

Histogram weight_histogram(const std::vector<double>& weights, double bin_width) {
  if (!(bin_width > 0.0 && bin_width <= 1.0)) throw ValidationError("bin width must lie in (0, 1]");
  Histogram h;
  h.bin_width = bin_width;
  const auto bins = static_cast<std::size_t>(std::ceil(1.0 / bin_width - 1e-9));
  h.counts.assign(bins, 0);
  for (const double w : weights) {
    if (!(w >= 0.0 && w <= 1.0)) throw ValidationError("weight outside [0, 1]: " + std::to_string(w));
    // Nudge so that decimal edges like 0.85 land in the bin they open.
    auto bin = static_cast<std::size_t>(std::floor(w / bin_width + 1e-9));
    h.counts[std::min(bin, bins - 1)] += 1;
  }
  return h;
}

std::string homogeneity_json(const HomogeneityReport& r) {
  json clusters = json::array();
  for (const auto& c : r.clusters) {
    clusters.push_back({{"cluster", c.cluster},
                        {"size", c.size},
                        {"labeled", c.labeled},
                        {"dominant_label", c.dominant_label},
                        {"dominant_count", c.dominant_count},
                        {"homogeneity", c.homogeneity ? json(*c.homogeneity) : json("undefined")}});
  }
  return json{{"clusters", clusters}, {"unlabeled_records_excluded", r.unlabeled_records}}.dump(2);
}

void write_link_matrix_csv(const std::filesystem::path& path, const LinkMatrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << "cluster";
  for (std::size_t b = 0; b < m.size(); ++b) out << ',' << b;
  out << '\n';
  for (std::size_t a = 0; a < m.size(); ++a) {
    out << a;
    for (std::size_t b = 0; b < m.size(); ++b) out << ',' << m.at(a, b);
    out << '\n';
  }
}

void write_histogram_csv(const std::filesystem::path& path, const Histogram& h) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << "bin_low,bin_high,count\n";
  char buf[64];
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.2f,%.2f,", h.low(i), std::min(1.0, h.high(i)));
    out << buf << h.counts[i] << '\n';
  }
}

std::string confusion_json(const ConfusionTable& t) {
  json rows = json::array();
  for (std::size_t c = 0; c < t.rows.size(); ++c) {
    const auto& r = t.rows[c];
    rows.push_back({{"cluster", c},
                    {t.first_label, r.first_only},
                    {t.second_label, r.second_only},
                    {"both", r.both},
                    {"other", r.other},
                    {"unlabeled", r.unlabeled}});
  }
  return json{{"labels", {t.first_label, t.second_label}}, {"rows", rows}}.dump(2);
}

std::string funnel_json(const RetentionFunnel& f) {
  json j = {{"total_refs", f.total_refs},
            {"in_coverage", f.in_coverage},
            {"in_window", f.in_window},
            {"in_graph", f.in_graph},
            {"defined", f.defined},
            {"in_coverage_pct", round_half_up(f.coverage_pct(), 1)},
            {"in_window_pct", round_half_up(f.window_pct(), 1)},
            {"in_graph_pct", round_half_up(f.graph_pct(), 1)},
            {"overall_retention_pct", round_half_up(f.graph_pct(), 2)}};
  return j.dump(2);
}

}  // namespace citeweave
