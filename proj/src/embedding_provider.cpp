#include "ccas/embedding_provider.hpp"

#include <algorithm>
#include <cstdint>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

#include "ccas/errors.hpp"
#include "ccas/fs_util.hpp"

namespace ccas {

namespace {

bool all_zero(const std::vector<double>& values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
}

void check_vector(const std::vector<double>& values, const std::string& text,
                  const std::string& where, ErrorKind kind) {
  if (values.size() < 2) {
    throw Error(kind, where + ": embedding for '" + text + "' has dimension " +
                          std::to_string(values.size()) + " (need >= 2)");
  }
  if (all_zero(values)) {
    throw Error(kind, where + ": embedding for '" + text + "' is a zero vector");
  }
}

}  // namespace

EmbeddingCache::EmbeddingCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::string EmbeddingCache::cache_key(const std::string& model_id, const std::string& text) {
  const std::string payload = model_id + "\n" + normalize_text(text);
  std::uint64_t hash = 1469598103934665603ull;
  for (unsigned char c : payload) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  std::ostringstream oss;
  oss << std::hex << hash;
  return oss.str();
}

std::optional<EmbeddingVector> EmbeddingCache::lookup(const std::string& model_id,
                                                      const std::string& text) const {
  if (!enabled()) return std::nullopt;
  const std::filesystem::path file = dir_ / (cache_key(model_id, text) + ".json");
  std::error_code ec;
  if (!std::filesystem::exists(file, ec)) return std::nullopt;
  nlohmann::json doc = nlohmann::json::parse(read_text_file(file), nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("vector")) return std::nullopt;
  // Guard against key collisions and stale entries: the record must describe
  // exactly this (model, text) pair.
  if (doc.value("model", "") != model_id || doc.value("text", "") != normalize_text(text)) {
    return std::nullopt;
  }
  EmbeddingVector v;
  v.values = doc["vector"].get<std::vector<double>>();
  v.source_model_id = model_id;
  if (v.values.size() < 2 || all_zero(v.values)) return std::nullopt;
  return v;
}

void EmbeddingCache::store(const std::string& model_id, const std::string& text,
                           const EmbeddingVector& vector) const {
  if (!enabled()) return;
  std::filesystem::create_directories(dir_);
  nlohmann::json doc = {
      {"text", normalize_text(text)}, {"model", model_id}, {"vector", vector.values}};
  atomic_write_file(dir_ / (cache_key(model_id, text) + ".json"), doc.dump());
}

EmbeddingProvider::EmbeddingProvider(Options options)
    : options_(std::move(options)),
      client_(options_.base_url, options_.api_key, options_.retry),
      cache_(options_.cache_dir) {}

std::vector<EmbeddingVector> EmbeddingProvider::embed_texts(const std::vector<std::string>& texts,
                                                            const std::string& model_id) {
  if (texts.empty()) {
    throw Error(ErrorKind::Data, "embed_texts needs at least one text");
  }
  std::vector<std::string> keys;
  keys.reserve(texts.size());
  for (const std::string& t : texts) {
    const std::string key = normalize_text(t);
    if (key.empty()) {
      throw Error(ErrorKind::Data, "embed_texts received an empty text");
    }
    keys.push_back(key);
  }

  // Unique texts in first-occurrence order; duplicates share one upstream slot.
  std::vector<std::string> unique;
  std::unordered_map<std::string, std::size_t> index_of;
  for (const std::string& key : keys) {
    if (index_of.emplace(key, unique.size()).second) unique.push_back(key);
  }

  std::unordered_map<std::string, EmbeddingVector> resolved;
  std::vector<std::string> missing;
  for (const std::string& key : unique) {
    if (auto hit = cache_.lookup(model_id, key)) {
      resolved.emplace(key, std::move(*hit));
    } else {
      missing.push_back(key);
    }
  }

  for (std::size_t start = 0; start < missing.size(); start += options_.batch_size) {
    const std::size_t end = std::min(missing.size(), start + options_.batch_size);
    const std::vector<std::string> batch(missing.begin() + static_cast<long>(start),
                                         missing.begin() + static_cast<long>(end));
    const std::vector<std::vector<double>> vectors = client_.embed(model_id, batch);
    if (vectors.size() != batch.size()) {
      throw Error(ErrorKind::Upstream,
                  "embedding service returned " + std::to_string(vectors.size()) +
                      " vectors for " + std::to_string(batch.size()) + " texts");
    }
    for (std::size_t i = 0; i < batch.size(); ++i) {
      check_vector(vectors[i], batch[i], "embedding service", ErrorKind::Upstream);
      EmbeddingVector v{vectors[i], model_id};
      cache_.store(model_id, batch[i], v);
      resolved.emplace(batch[i], std::move(v));
    }
  }

  // One dimension across the whole batch, cache hits included.
  const std::size_t dim = resolved.at(unique.front()).dim();
  for (const std::string& key : unique) {
    if (resolved.at(key).dim() != dim) {
      throw Error(ErrorKind::Upstream, "embedding dimensions disagree within one batch: '" +
                                           unique.front() + "' has " + std::to_string(dim) +
                                           ", '" + key + "' has " +
                                           std::to_string(resolved.at(key).dim()));
    }
  }

  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const std::string& key : keys) out.push_back(resolved.at(key));
  return out;
}

std::map<std::string, EmbeddingVector> load_embedding_file(const std::filesystem::path& path) {
  const std::string content = read_text_file(path);
  std::map<std::string, EmbeddingVector> out;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  std::string model;
  std::istringstream in(content);
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (normalize_text(line).empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    nlohmann::json doc = nlohmann::json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("text") ||
        !doc.contains("model") || !doc.contains("vector") || !doc["vector"].is_array()) {
      throw Error(ErrorKind::Data,
                  where + ": expected {\"text\": ..., \"model\": ..., \"vector\": [...]}");
    }
    const std::string text = doc["text"].get<std::string>();
    EmbeddingVector v;
    v.values = doc["vector"].get<std::vector<double>>();
    v.source_model_id = doc["model"].get<std::string>();
    check_vector(v.values, text, where, ErrorKind::Data);
    const std::string key = normalize_text(text);
    if (key.empty()) {
      throw Error(ErrorKind::Data, where + ": record has empty text");
    }
    if (out.count(key)) {
      throw Error(ErrorKind::Data, where + ": duplicate record for text '" + text + "'");
    }
    if (dim == 0) {
      dim = v.values.size();
      model = v.source_model_id;
    } else if (v.values.size() != dim) {
      throw Error(ErrorKind::Data, where + ": dimension " + std::to_string(v.values.size()) +
                                       " differs from earlier records (" + std::to_string(dim) + ")");
    } else if (v.source_model_id != model) {
      throw Error(ErrorKind::Data, where + ": model '" + v.source_model_id +
                                       "' differs from earlier records ('" + model + "')");
    }
    out[key] = std::move(v);
  }
  return out;
}

void save_embedding_file(const std::map<std::string, EmbeddingVector>& embeddings,
                         const std::filesystem::path& path) {
  std::string body;
  for (const auto& [text, vector] : embeddings) {
    nlohmann::json doc = {{"text", text}, {"model", vector.source_model_id}, {"vector", vector.values}};
    body += doc.dump();
    body += "\n";
  }
  atomic_write_file(path, body);
}

}  // namespace ccas
