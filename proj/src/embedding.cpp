#include "citeweave/embedding.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <mutex>
#include <optional>
#include <thread>
#include <unordered_map>

#include <httplib.h>
#include <json.hpp>

#include "citeweave/error.hpp"

namespace citeweave {

static_assert(std::endian::native == std::endian::little,
              "EMB1 I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'E', 'M', 'B', '1'};

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw ValidationError("truncated EMB1 header");
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
         std::uint32_t(b[3]) << 24;
}

void write_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

struct Url {
  std::string scheme_host_port;
  std::string path;
};

Url split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ValidationError("embedding endpoint must be a URL: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(std::size_t n, std::size_t d, std::vector<float> data,
                                 bool normalized)
    : n_(n), d_(d), data_(std::move(data)), normalized_(normalized) {
  if (data_.size() != n_ * d_) throw ValidationError("embedding payload does not match n*d");
}

LabeledEmbeddings load_embeddings(const std::filesystem::path& vectors_path,
                                  const std::filesystem::path& ids_path) {
  std::ifstream in(vectors_path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + vectors_path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw ValidationError(vectors_path.string() + ": bad magic, expected EMB1");
  const std::size_t n = read_u32(in);
  const std::size_t d = read_u32(in);

  in.seekg(0, std::ios::end);
  const auto payload = static_cast<std::uint64_t>(in.tellg()) - 12;
  if (payload != std::uint64_t(n) * d * sizeof(float))
    throw ValidationError(vectors_path.string() + ": header/payload size mismatch (n=" +
                          std::to_string(n) + ", d=" + std::to_string(d) + ", payload " +
                          std::to_string(payload) + " bytes)");
  in.seekg(12);
  std::vector<float> data(n * d);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(payload));

  std::ifstream ids_in(ids_path, std::ios::binary);
  if (!ids_in) throw ValidationError("cannot open " + ids_path.string());
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(ids_in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ids.push_back(line);
  }
  if (ids.size() != n)
    throw ValidationError("id count mismatch: ids file has " + std::to_string(ids.size()) +
                          " lines, header says n=" + std::to_string(n));
  return {EmbeddingMatrix(n, d, std::move(data)), std::move(ids)};
}

void save_embeddings(const std::filesystem::path& vectors_path,
                     const std::filesystem::path& ids_path, const EmbeddingMatrix& m,
                     const std::vector<std::string>& ids) {
  if (ids.size() != m.n()) throw ValidationError("id count mismatch");
  std::ofstream out(vectors_path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + vectors_path.string());
  out.write(kMagic, 4);
  write_u32(out, static_cast<std::uint32_t>(m.n()));
  write_u32(out, static_cast<std::uint32_t>(m.d()));
  out.write(reinterpret_cast<const char*>(m.data().data()),
            static_cast<std::streamsize>(m.data().size() * sizeof(float)));
  std::ofstream ids_out(ids_path, std::ios::binary);
  if (!ids_out) throw RuntimeFailure("cannot write " + ids_path.string());
  for (const auto& id : ids) ids_out << id << '\n';
}

EmbeddingMatrix bind_to_graph(const LabeledEmbeddings& emb, const CorpusGraph& graph,
                              bool allow_extra) {
  const auto& m = emb.matrix;
  std::unordered_map<std::string, std::size_t> row_of;
  row_of.reserve(emb.ids.size());
  for (std::size_t r = 0; r < emb.ids.size(); ++r) {
    if (!row_of.emplace(emb.ids[r], r).second)
      throw ValidationError("duplicate id in embeddings: " + emb.ids[r]);
    if (!allow_extra && !graph.index_of(emb.ids[r]))
      throw ValidationError("embedding id not in corpus: " + emb.ids[r]);
  }
  std::vector<float> data(graph.n() * m.d());
  std::vector<std::string> missing;
  for (NodeId i = 0; i < graph.n(); ++i) {
    auto it = row_of.find(graph.id_of(i));
    if (it == row_of.end()) {
      missing.push_back(graph.id_of(i));
      continue;
    }
    const auto src = m.row(it->second);
    std::copy(src.begin(), src.end(), data.begin() + static_cast<std::ptrdiff_t>(i * m.d()));
  }
  if (!missing.empty()) {
    std::string msg = "corpus node without embedding:";
    for (std::size_t i = 0; i < missing.size() && i < 10; ++i) msg += " " + missing[i];
    if (missing.size() > 10) msg += " ... (" + std::to_string(missing.size()) + " total)";
    throw ValidationError(msg);
  }
  return EmbeddingMatrix(graph.n(), m.d(), std::move(data), m.normalized());
}

EmbeddingMatrix normalize_rows(const EmbeddingMatrix& m) {
  EmbeddingMatrix out = m;
  for (std::size_t i = 0; i < out.n(); ++i) {
    auto row = out.row(i);
    const double norm = std::sqrt(dot(row, row));
    if (norm == 0.0) throw ValidationError("cannot normalize zero row " + std::to_string(i));
    for (auto& x : row) x = static_cast<float>(static_cast<double>(x) / norm);
  }
  out.normalized_ = true;
  return out;
}

double cosine(std::size_t u, std::size_t v, const EmbeddingMatrix& m) {
  if (u >= m.n() || v >= m.n()) throw ValidationError("cosine: row index out of range");
  const auto a = m.row(u);
  const auto b = m.row(v);
  double c;
  if (m.normalized()) {
    c = dot(a, b);
  } else {
    const double denom = std::sqrt(dot(a, a)) * std::sqrt(dot(b, b));
    if (denom == 0.0) throw ValidationError("cosine of a zero row");
    c = dot(a, b) / denom;
  }
  return std::clamp(c, -1.0, 1.0);
}

std::string embedding_text(const PublicationRecord& record) {
  return record.title + " " + record.abstract;
}

EmbeddingMatrix embed_via_service(const std::vector<PublicationRecord>& records,
                                  const ServiceOptions& options) {
  using json = nlohmann::json;
  if (records.empty()) return {};
  if (options.batch_size == 0) throw ValidationError("batch_size must be positive");
  const Url url = split_url(options.endpoint);
  const std::size_t batches = (records.size() + options.batch_size - 1) / options.batch_size;

  std::vector<std::vector<std::vector<float>>> results(batches);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  std::optional<std::pair<std::size_t, std::string>> first_error;

  auto record_error = [&](std::size_t batch, std::string msg) {
    std::lock_guard lock(error_mutex);
    if (!first_error || batch < first_error->first) first_error.emplace(batch, std::move(msg));
    failed = true;
  };

  auto worker = [&] {
    httplib::Client client(url.scheme_host_port);
    client.set_connection_timeout(options.timeout);
    client.set_read_timeout(options.timeout);
    for (std::size_t b; !failed && (b = next.fetch_add(1)) < batches;) {
      const std::size_t lo = b * options.batch_size;
      const std::size_t hi = std::min(records.size(), lo + options.batch_size);
      json body;
      body["texts"] = json::array();
      for (std::size_t i = lo; i < hi; ++i) body["texts"].push_back(embedding_text(records[i]));
      const std::string payload = body.dump();

      std::string last_error;
      auto backoff = options.initial_backoff;
      bool ok = false;
      for (int attempt = 0; attempt < options.max_attempts && !ok; ++attempt) {
        if (attempt > 0) {
          std::this_thread::sleep_for(backoff);
          backoff = std::min(backoff * 2, options.max_backoff);
        }
        auto res = client.Post(url.path, payload, "application/json");
        if (!res) {
          last_error = "network error: " + httplib::to_string(res.error());
          continue;
        }
        if (res->status != 200) {
          last_error = "HTTP status " + std::to_string(res->status);
          continue;
        }
        try {
          const auto reply = json::parse(res->body);
          const auto& vectors = reply.at("vectors");
          if (!vectors.is_array() || vectors.size() != hi - lo) {
            last_error = "service returned " + std::to_string(vectors.size()) + " vectors for " +
                         std::to_string(hi - lo) + " texts";
            continue;
          }
          auto& out = results[b];
          out.clear();
          for (const auto& v : vectors) out.push_back(v.get<std::vector<float>>());
          ok = true;
        } catch (const json::exception& e) {
          last_error = std::string("malformed service response: ") + e.what();
        }
      }
      if (!ok) record_error(b, "embedding failed at pub_id " + records[lo].pub_id + ": " + last_error);
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, batches));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (first_error) throw RuntimeFailure(first_error->second);

  std::size_t d = 0;
  std::vector<float> data;
  for (std::size_t b = 0; b < batches; ++b) {
    for (std::size_t i = 0; i < results[b].size(); ++i) {
      const auto& v = results[b][i];
      if (b == 0 && i == 0) {
        d = v.size();
        if (d == 0) throw RuntimeFailure("service returned empty vectors");
        data.reserve(records.size() * d);
      } else if (v.size() != d) {
        throw RuntimeFailure("dimension drift: expected d=" + std::to_string(d) + ", got " +
                             std::to_string(v.size()) + " at pub_id " +
                             records[b * options.batch_size + i].pub_id);
      }
      data.insert(data.end(), v.begin(), v.end());
    }
  }
  return EmbeddingMatrix(records.size(), d, std::move(data));
}

}  // namespace citeweave
