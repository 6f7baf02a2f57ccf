#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "citeweave/corpus.hpp"

namespace citeweave {

/// Dense n x d float32 matrix, row-major, one row per node.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t n, std::size_t d, std::vector<float> data, bool normalized = false);

  std::size_t n() const { return n_; }
  std::size_t d() const { return d_; }
  bool normalized() const { return normalized_; }
  std::span<const float> row(std::size_t i) const { return {data_.data() + i * d_, d_}; }
  std::span<float> row(std::size_t i) { return {data_.data() + i * d_, d_}; }
  const std::vector<float>& data() const { return data_; }

 private:
  friend EmbeddingMatrix normalize_rows(const EmbeddingMatrix&);
  std::size_t n_ = 0;
  std::size_t d_ = 0;
  std::vector<float> data_;
  bool normalized_ = false;
};

/// Rows plus the pub_id naming each row, as stored on disk.
struct LabeledEmbeddings {
  EmbeddingMatrix matrix;
  std::vector<std::string> ids;
};

/// Reads an EMB1 vectors file and its ids file.
LabeledEmbeddings load_embeddings(const std::filesystem::path& vectors_path,
                                  const std::filesystem::path& ids_path);

void save_embeddings(const std::filesystem::path& vectors_path,
                     const std::filesystem::path& ids_path, const EmbeddingMatrix& m,
                     const std::vector<std::string>& ids);

/// Permutes rows into the node-index order of `graph`. Ids outside the corpus
/// are ignored only when `allow_extra` is set; a corpus node without a row is
/// always an error.
EmbeddingMatrix bind_to_graph(const LabeledEmbeddings& emb, const CorpusGraph& graph,
                              bool allow_extra = false);

/// Divides each row by its Euclidean norm. Throws on an all-zero row.
EmbeddingMatrix normalize_rows(const EmbeddingMatrix& m);

/// Dot product accumulated in double, left to right over the dimension.
/// The fixed order makes dot(a, b) == dot(b, a) bit for bit.
inline double dot(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

/// Cosine similarity of rows u and v, clamped to [-1, 1]. On a normalized
/// matrix this is the plain dot product.
double cosine(std::size_t u, std::size_t v, const EmbeddingMatrix& m);

struct ServiceOptions {
  std::string endpoint;  ///< http://host[:port]/path
  std::size_t batch_size = 64;
  std::size_t workers = 1;
  int max_attempts = 4;
  std::chrono::milliseconds initial_backoff{200};
  std::chrono::milliseconds max_backoff{5000};
  std::chrono::seconds timeout{60};
};

/// Text sent to the embedding service for a record: title, one space, abstract.
std::string embedding_text(const PublicationRecord& record);

/// Embeds records through an HTTP service that accepts {"texts": [...]} and
/// answers {"vectors": [[...], ...]}. Row i belongs to records[i].
EmbeddingMatrix embed_via_service(const std::vector<PublicationRecord>& records,
                                  const ServiceOptions& options);

}  // namespace citeweave
