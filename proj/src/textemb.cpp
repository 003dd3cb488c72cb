#include "gamic/textemb.h"

#include <cmath>
#include <json.hpp>

#include "gamic/binary_io.h"
#include "gamic/errors.h"

namespace gamic {

namespace {

constexpr std::string_view kMagic{"GEMB\x01", 5};

void normalize(std::vector<float>& v, const std::string& id) {
  double sq = 0.0;
  for (float x : v) {
    if (!std::isfinite(x)) throw FormatError("embedding for '" + id + "' has a non-finite value");
    sq += static_cast<double>(x) * static_cast<double>(x);
  }
  const double norm = std::sqrt(sq);
  if (norm == 0.0) throw FormatError("embedding for '" + id + "' is the zero vector");
  if (std::abs(norm - 1.0) <= 1e-6) return;
  for (float& x : v) x = static_cast<float>(static_cast<double>(x) / norm);
}

}  // namespace

void TextEmbeddingIndex::add(std::string id, std::vector<float> values) {
  if (values.size() != dim_) {
    throw FormatError("embedding for '" + id + "' has " + std::to_string(values.size()) + " values, index dim is " +
                      std::to_string(dim_));
  }
  if (rows_.count(id)) throw FormatError("duplicate embedding id '" + id + "'");
  normalize(values, id);
  ids_.push_back(id);
  rows_.emplace(std::move(id), std::move(values));
}

const std::vector<float>& TextEmbeddingIndex::at(std::string_view id) const {
  auto it = rows_.find(id);
  if (it == rows_.end()) throw DataError("no embedding for id '" + std::string(id) + "'");
  return it->second;
}

std::string serialize_embeddings(const TextEmbeddingIndex& index) {
  io::ByteWriter w;
  w.bytes(kMagic);
  w.u32(static_cast<std::uint32_t>(index.dim()));
  w.u32(static_cast<std::uint32_t>(index.size()));
  for (const auto& id : index.ids()) {
    w.short_string(id);
    for (float x : index.at(id)) w.f32(x);
  }
  return w.release();
}

TextEmbeddingIndex deserialize_embeddings(std::string_view bytes, std::string provenance) {
  io::ByteReader r(bytes);
  r.expect_magic(kMagic);
  const std::uint32_t dim = r.u32();
  const std::uint32_t count = r.u32();
  if (dim == 0 && count > 0) throw FormatError("embedding file declares dim 0");
  TextEmbeddingIndex index(dim, std::move(provenance));
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string id = r.short_string();
    std::vector<float> v(dim);
    for (auto& x : v) x = r.f32();
    index.add(std::move(id), std::move(v));
  }
  if (!r.at_end()) throw FormatError("trailing bytes after embedding records");
  return index;
}

void write_embedding_file(const std::string& path, const TextEmbeddingIndex& index) {
  io::write_file_atomic(path, serialize_embeddings(index));
}

TextEmbeddingIndex load_embedding_file(const std::string& path, std::string provenance) {
  return deserialize_embeddings(io::read_file(path), std::move(provenance));
}

std::vector<std::vector<float>> fetch_embeddings(const std::vector<std::string>& texts,
                                                 const EmbeddingEndpoint& endpoint) {
  std::vector<std::vector<float>> out;
  if (texts.empty()) return out;
  const std::size_t batch = std::max<std::size_t>(1, endpoint.batch_size);
  for (std::size_t start = 0; start < texts.size(); start += batch) {
    const std::size_t end = std::min(texts.size(), start + batch);
    nlohmann::json req;
    req["texts"] = std::vector<std::string>(texts.begin() + static_cast<std::ptrdiff_t>(start),
                                            texts.begin() + static_cast<std::ptrdiff_t>(end));
    const HttpOutcome res = post_json(endpoint.http, req.dump());
    if (!res.ok) {
      throw RetryableError("embedding request failed after " + std::to_string(res.attempts) + " attempts: " + res.error);
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(res.body);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("embedding response is not JSON: ") + e.what());
    }
    if (!j.contains("embeddings") || !j["embeddings"].is_array()) {
      throw FormatError("embedding response has no \"embeddings\" array");
    }
    const auto& rows = j["embeddings"];
    if (rows.size() != end - start) {
      throw FormatError("embedding service returned " + std::to_string(rows.size()) + " vectors for " +
                        std::to_string(end - start) + " texts");
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::vector<float> v;
      try {
        v = rows[i].get<std::vector<float>>();
      } catch (const nlohmann::json::exception&) {
        throw FormatError("embedding " + std::to_string(start + i) + " is not a numeric array");
      }
      if (!out.empty() && v.size() != out.front().size()) {
        throw FormatError("embedding " + std::to_string(start + i) + " has width " + std::to_string(v.size()) +
                          ", expected " + std::to_string(out.front().size()));
      }
      if (v.empty()) throw FormatError("embedding " + std::to_string(start + i) + " is empty");
      normalize(v, "text " + std::to_string(start + i));
      out.push_back(std::move(v));
    }
  }
  return out;
}

}  // namespace gamic
