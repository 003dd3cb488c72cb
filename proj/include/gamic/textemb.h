#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gamic/http_client.h"

namespace gamic {

/// Caption embeddings keyed by record id. Vectors are unit length.
class TextEmbeddingIndex {
 public:
  TextEmbeddingIndex() = default;
  explicit TextEmbeddingIndex(std::size_t dim, std::string provenance = {}) : dim_(dim), provenance_(std::move(provenance)) {}

  /// Normalizes the vector unless it is already unit length to within 1e-6.
  /// Throws FormatError on a duplicate id, wrong width or a zero vector.
  void add(std::string id, std::vector<float> values);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }
  const std::string& provenance() const noexcept { return provenance_; }
  void set_provenance(std::string p) { provenance_ = std::move(p); }
  bool contains(std::string_view id) const { return rows_.find(id) != rows_.end(); }
  /// Throws DataError for unknown ids.
  const std::vector<float>& at(std::string_view id) const;
  /// Ids in insertion (file) order.
  const std::vector<std::string>& ids() const noexcept { return ids_; }

 private:
  std::size_t dim_ = 0;
  std::string provenance_;
  std::vector<std::string> ids_;
  std::map<std::string, std::vector<float>, std::less<>> rows_;
};

// GEMB container: "GEMB\x01", u32 dim, u32 count, then per record u16 id
// length + UTF-8 id + dim f32 values, all little-endian.
std::string serialize_embeddings(const TextEmbeddingIndex& index);
TextEmbeddingIndex deserialize_embeddings(std::string_view bytes, std::string provenance = {});
void write_embedding_file(const std::string& path, const TextEmbeddingIndex& index);
TextEmbeddingIndex load_embedding_file(const std::string& path, std::string provenance = {});

struct EmbeddingEndpoint {
  HttpEndpoint http;
  std::size_t batch_size = 64;  // texts per request
};

/// POSTs {"texts": [...]} and reads {"embeddings": [[...], ...]} back, in
/// request order, normalized. No request is made for an empty list.
/// Transport failures that outlast the retries raise RetryableError; a
/// response with the wrong count or inconsistent widths raises FormatError.
std::vector<std::vector<float>> fetch_embeddings(const std::vector<std::string>& texts,
                                                 const EmbeddingEndpoint& endpoint);

}  // namespace gamic
